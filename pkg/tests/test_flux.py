import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from upwindfilter.flux import (FluxSpec, RangeViolation, advection, burgers, directional_split,
                               eo_antisymmetry_check, eo_flux, lwr, read_flux_csv, split_scalar,
                               table_flux)

S = np.linspace(-1.0, 1.0, 2001)
unit = st.floats(-1.0, 1.0, allow_nan=False)


def test_burgers_split_closed_form():
    sp = directional_split(burgers(), (1.0,))
    np.testing.assert_array_equal(sp.g_plus(S), 0.5 * np.maximum(S, 0) ** 2)
    np.testing.assert_array_equal(sp.g_minus(S), 0.5 * np.minimum(S, 0) ** 2)


def test_reversed_direction_swaps_roles():
    sp = directional_split(burgers(), (-1.0,))
    np.testing.assert_allclose(sp.g_plus(S), -0.5 * np.minimum(S, 0) ** 2, atol=1e-15)
    np.testing.assert_allclose(sp.g_minus(S), -0.5 * np.maximum(S, 0) ** 2, atol=1e-15)
    np.testing.assert_allclose(sp.g_plus(S) + sp.g_minus(S), -0.5 * S**2, atol=1e-15)


def test_negative_direction_plus_part():
    # -u^2/2 increases on u < 0
    sp = directional_split(burgers(), (-1.0,))
    s = np.linspace(-1, 0, 11)
    np.testing.assert_allclose(np.diff(sp.g_plus(s)) >= 0, True)
    np.testing.assert_allclose(sp.g_plus(0.0), 0.0)


def test_split_sums_to_flux_and_is_monotone():
    for F, n in ((burgers(), (1.0,)), (lwr(), (1.0,)), (advection(-2.0), (1.0,)),
                 (burgers((1.0, 0.5)), (0.6, 0.8))):
        sp = directional_split(F, n)
        s = np.linspace(*F.state_range, 1001)
        g, _ = F.along(n)
        np.testing.assert_allclose(sp.g_plus(s) + sp.g_minus(s), g(s), atol=1e-14)
        assert np.all(np.diff(sp.g_plus(s)) >= -1e-15)
        assert np.all(np.diff(sp.g_minus(s)) <= 1e-15)
        assert sp.g_plus(0.0) == 0.0 and sp.g_minus(0.0) == 0.0


def test_lwr_split_values():
    sp = directional_split(lwr(), (1.0,))
    assert sp.g_plus(0.25) == pytest.approx(0.1875)
    assert sp.g_plus(0.8) == pytest.approx(0.25)
    assert sp.g_minus(0.8) == pytest.approx(0.16 - 0.25)
    assert sp.g_minus(0.3) == 0.0


def test_transverse_direction_gives_zero():
    F = FluxSpec([lambda u: u, lambda u: 0.0 * u], [lambda u: 1.0 + 0 * u, lambda u: 0.0 * u], (-1, 1))
    sp = directional_split(F, (0.0, 1.0))
    assert np.max(np.abs(sp.g_plus(S))) == 0.0
    assert np.max(np.abs(sp.g_minus(S))) == 0.0


def test_non_unit_direction_rejected():
    with pytest.raises(ValueError, match="unit"):
        directional_split(burgers((1.0, 0.0)), (1.0, 1.0))


def test_eo_examples():
    sp = directional_split(burgers(), (1.0,))
    assert eo_flux(sp, 1.0, 0.0) == pytest.approx(0.5)
    assert eo_flux(sp, -1.0, 1.0) == 0.0
    assert eo_flux(sp, 0.5, -0.5) == pytest.approx(0.25)


def test_eo_range_violation():
    sp = directional_split(burgers(), (1.0,))
    with pytest.raises(RangeViolation):
        eo_flux(sp, 1.5, 0.0)


def test_eo_antisymmetry_random():
    rng = np.random.default_rng(3)
    for F, n in ((burgers(), (1.0,)), (lwr(), (1.0,)), (burgers((1.0, -0.3)), (0.6, 0.8))):
        a, b = rng.uniform(*F.state_range, (2, 1000))
        m = tuple(-x for x in n)
        assert eo_antisymmetry_check(directional_split(F, n), directional_split(F, m), a, b)


@settings(max_examples=200, deadline=None)
@given(unit, unit)
def test_eo_consistency_property(a, b):
    sp = directional_split(burgers(), (1.0,))
    assert eo_flux(sp, a, a) == pytest.approx(0.5 * a * a, abs=1e-15)
    # non-decreasing in the first slot, non-increasing in the second
    assert eo_flux(sp, max(a, b), b) >= eo_flux(sp, min(a, b), b)
    assert eo_flux(sp, a, max(a, b)) <= eo_flux(sp, a, min(a, b))


def test_numeric_split_matches_closed_form():
    plus, minus = split_scalar(lambda u: 0.5 * u * u + 0.0 * u, lambda u: u, (-1.0, 1.0))
    np.testing.assert_allclose(plus(S), 0.5 * np.maximum(S, 0) ** 2, atol=1e-6)
    np.testing.assert_allclose(minus(S), 0.5 * np.minimum(S, 0) ** 2, atol=1e-6)


def test_general_flux_split_without_derivative_profile():
    F = FluxSpec([np.sin], [np.cos], (-3.0, 3.0))
    sp = directional_split(F, (1.0,))
    s = np.linspace(-3, 3, 601)
    np.testing.assert_allclose(sp.g_plus(s) + sp.g_minus(s), np.sin(s), atol=1e-5)
    assert np.all(np.diff(sp.g_plus(s)) >= -1e-12)
    assert np.all(np.diff(sp.g_minus(s)) <= 1e-12)


def test_table_flux_matches_closed_form_at_nodes():
    nodes = np.linspace(-1, 1, 41)
    F = table_flux(nodes, 0.5 * nodes**2)
    sp = directional_split(F, (1.0,))
    np.testing.assert_allclose(sp.g_plus(nodes), 0.5 * np.maximum(nodes, 0) ** 2, atol=1e-14)
    np.testing.assert_allclose(sp.g_minus(nodes), 0.5 * np.minimum(nodes, 0) ** 2, atol=1e-14)
    assert F.lipschitz == pytest.approx(0.975)


def test_table_flux_from_csv(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("u,f\n-1,1\n0,0\n1,1\n")
    F = read_flux_csv(p)
    assert F(np.array([0.5]))[0, 0] == pytest.approx(0.5)
    sp = directional_split(F, (-1.0,))
    # -|u| increases on u < 0
    assert sp.g_plus(-0.5) == pytest.approx(-0.5)
    assert sp.g_minus(0.5) == pytest.approx(-0.5)


def test_flux_normalised_to_zero_at_origin():
    F = FluxSpec([lambda u: u + 3.0], [lambda u: 1.0 + 0 * u], (-1, 1))
    assert F(np.array([0.0]))[0, 0] == 0.0


def test_state_range_must_contain_zero():
    with pytest.raises(ValueError, match="contain 0"):
        burgers(state_range=(0.1, 1.0))


def test_lipschitz_too_small_rejected():
    with pytest.raises(ValueError, match="lipschitz"):
        burgers(lipschitz=0.5)


def test_negated_flips_sign():
    F = lwr()
    G = F.negated()
    s = np.linspace(0, 1, 11)
    np.testing.assert_allclose(G(s), -F(s))
    assert G.lipschitz == F.lipschitz
