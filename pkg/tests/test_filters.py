import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from upwindfilter.filters import (OffLatticeWarning, builtin_filter, derivative_cell_weights, dirac,
                                  moment_distance, read_filter_csv, rescale, tabulated_filter)

NAMES = ("box", "hat", "exponential")


def midpoint(fn, a, b, n=1_000_000):
    x = a + (np.arange(n) + 0.5) * (b - a) / n
    return float(np.sum(fn(x)) * (b - a) / n)


@pytest.mark.parametrize("name", NAMES)
def test_unit_mass_and_moments(name):
    phi = builtin_filter(name)
    R = phi.support_radius
    assert midpoint(phi.density, 0, R) == pytest.approx(1.0, abs=1e-6)
    assert midpoint(lambda r: r * phi.density(r), 0, R) == pytest.approx(phi.first_moment, abs=1e-6)
    assert phi.mass == 1.0


def test_builtin_values():
    assert builtin_filter("box").first_moment == 0.5
    assert builtin_filter("hat").first_moment == pytest.approx(1 / 3)
    assert builtin_filter("exponential").first_moment == 1.0
    assert builtin_filter("hat").phi_at_zero == 2.0


def test_rescale():
    phi = rescale(builtin_filter("hat"), 0.25)
    assert phi.phi_at_zero == 8.0
    assert phi.first_moment == pytest.approx(1 / 12)
    assert float(phi.density(0.125)) == pytest.approx(4.0)
    assert phi.support_radius == 0.25
    assert rescale(rescale(builtin_filter("box"), 0.5), 0.5).alpha == 0.25
    with pytest.raises(ValueError):
        rescale(builtin_filter("box"), 0.0)


def test_box_atom():
    phi = rescale(builtin_filter("box"), 0.25)
    assert phi.atoms_of_derivative == ((0.25, -4.0),)


def test_unknown_filter():
    with pytest.raises(ValueError, match="unknown filter"):
        builtin_filter("gauss")


def test_moment_distance_examples():
    box, hat = builtin_filter("box"), builtin_filter("hat")
    assert moment_distance(box, dirac()) == pytest.approx(0.5, abs=1e-12)
    assert moment_distance(box, hat) == pytest.approx(0.25, abs=1e-10)
    oracle = midpoint(lambda r: r * np.abs(box.density(r) - hat.density(r)), 0.0, 1.0)
    assert moment_distance(box, hat) == pytest.approx(oracle, abs=1e-9)


def test_moment_distance_scales_with_alpha():
    box, hat = builtin_filter("box"), builtin_filter("hat")
    for a in (0.5, 0.1):
        d = moment_distance(rescale(box, a), rescale(hat, a))
        assert d == pytest.approx(0.25 * a, rel=1e-9)


scales = st.floats(0.05, 2.0)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(NAMES), st.sampled_from(NAMES), st.sampled_from(NAMES), scales, scales, scales)
def test_moment_distance_metric(a, b, c, sa, sb, sc):
    f, g, k = rescale(builtin_filter(a), sa), rescale(builtin_filter(b), sb), rescale(builtin_filter(c), sc)
    dfg = moment_distance(f, g)
    assert dfg >= 0
    assert dfg == pytest.approx(moment_distance(g, f), rel=1e-8, abs=1e-12)
    assert moment_distance(f, f) == 0.0
    assert dfg <= moment_distance(f, k) + moment_distance(k, g) + 1e-9


@pytest.mark.parametrize("name", NAMES)
def test_cell_weights_sum_and_sign(name):
    alpha, h = 0.25, 1 / 64
    phi = rescale(builtin_filter(name), alpha)
    psi = derivative_cell_weights(phi, h)
    assert np.all(psi <= 0)
    # truncated exponential tail only loses Phi at the cut-off
    assert psi.sum() == pytest.approx(-phi.phi_at_zero, rel=1e-7)


def test_hat_cell_weights():
    alpha, h = 0.25, 1 / 64
    psi = derivative_cell_weights(rescale(builtin_filter("hat"), alpha), h)
    np.testing.assert_allclose(psi[1:-1], -2 * h / alpha**2, rtol=1e-12)
    assert psi[0] == pytest.approx(-3 * h / alpha**2)


def test_box_cell_weights_single_atom():
    psi = derivative_cell_weights(rescale(builtin_filter("box"), 0.25), 1 / 64)
    assert psi[15] == pytest.approx(-4.0)
    assert np.count_nonzero(psi) == 1


def test_off_lattice_warning():
    with pytest.warns(OffLatticeWarning, match="atom off-lattice"):
        derivative_cell_weights(rescale(builtin_filter("box"), 0.1), 0.03)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        derivative_cell_weights(rescale(builtin_filter("box"), 0.25), 1 / 64)


def test_dirac_cannot_be_discretised():
    with pytest.raises(ValueError):
        derivative_cell_weights(dirac(), 0.1)


def test_tabulated_hat_matches_builtin():
    tab = tabulated_filter([0.0, 1.0], [2.0, 0.0])
    hat = builtin_filter("hat")
    r = np.linspace(0, 1.2, 97)
    np.testing.assert_allclose(tab.density(r), hat.density(r), atol=1e-15)
    assert tab.first_moment == pytest.approx(1 / 3)
    np.testing.assert_allclose(derivative_cell_weights(rescale(tab, 0.25), 1 / 64),
                               derivative_cell_weights(rescale(hat, 0.25), 1 / 64), atol=1e-12)


def test_tabulated_box_has_atom():
    tab = tabulated_filter([0.0, 1.0], [1.0, 1.0])
    assert tab.atoms_of_derivative == ((1.0, -1.0),)
    assert tabulated_filter([0.0, 0.5, 0.5, 1.0], [1.5, 1.5, 0.5, 0.5]).base_atoms == ((0.5, -1.0), (1.0, -0.5))


@pytest.mark.parametrize("r,v,msg", [
    ([0.0, 1.0], [1.0, 0.5], "mass"),
    ([0.0, 0.5, 1.0], [1.0, 1.5, 0.5], "non-increasing"),
    ([0.1, 1.0], [1.0, 1.0], "start"),
    ([0.0, 1.0], [-1.0, 3.0], "non-negative"),
])
def test_tabulated_validation(r, v, msg):
    with pytest.raises(ValueError, match=msg):
        tabulated_filter(r, v)


def test_declared_atoms_checked():
    with pytest.raises(ValueError, match="atoms"):
        tabulated_filter([0.0, 1.0], [1.0, 1.0], atoms=[(0.5, -1.0)])


def test_filter_csv(tmp_path):
    p = tmp_path / "phi.csv"
    p.write_text("r,phi\n0,2\n1,0\n")
    f = read_filter_csv(p)
    assert f.phi_at_zero == 2.0
    assert math.isclose(f.first_moment, 1 / 3)
