import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from upwindfilter import analysis as an
from upwindfilter.config import random_bv
from upwindfilter.evolve import Integrator, run
from upwindfilter.filters import builtin_filter, rescale
from upwindfilter.flux import FluxSpec, burgers, directional_split, lwr
from upwindfilter.geometry import Grid, GridFunction, standard_measure
from upwindfilter.operator import build_plan


def test_tv_and_norms():
    g = Grid((8,), (1.0,))
    u = np.array([0, 0, 0, 0, 1, 1, 1, 1.0])
    assert an.tv(u, g) == 2.0
    assert an.l1_distance(u, np.zeros(8), g) == 0.5
    assert an.mass(GridFunction(g, u)) == 0.5
    g2 = Grid((4, 4), (1.0, 1.0))
    v = np.zeros((4, 4))
    v[:2] = 1.0
    # variation across x only, weighted by the transverse spacing
    assert an.tv_axes(v, g2) == (2.0, 0.0)


def test_entropy_flux_closed_form():
    F = burgers()
    qp, qm = an.entropy_flux_pair(F, (1.0,), an.eta_square())
    s = np.linspace(-1, 1, 201)
    np.testing.assert_allclose(qp(s), 2 / 3 * np.maximum(s, 0) ** 3, atol=1e-15)
    np.testing.assert_allclose(qm(s), 2 / 3 * np.minimum(s, 0) ** 3, atol=1e-15)


def test_kruzkov_flux_closed_form():
    qp, qm = an.entropy_flux_pair(burgers(), (1.0,), an.eta_kruzkov(0.25))
    assert qp(0.5) == pytest.approx(0.125 - 0.03125)
    assert qp(-0.5) == pytest.approx(0.03125)
    assert qm(-0.5) == pytest.approx(-0.125)


def test_quadrature_flux_matches_adaptive_oracle():
    F = lwr()
    sp = directional_split(F, (1.0,))
    eta = an.eta_exp()
    qp, qm = an.entropy_flux_pair(F, (1.0,), eta)
    for u in (0.1, 0.37, 0.5, 0.81, 1.0):
        ref_p = integrate.quad(lambda s: math.exp(s) * float(sp.dg_plus(s)), 0, u, points=[0.5])[0]
        ref_m = integrate.quad(lambda s: math.exp(s) * float(sp.dg_minus(s)), 0, u, points=[0.5])[0]
        assert float(qp(u)) == pytest.approx(ref_p, abs=1e-13)
        assert float(qm(u)) == pytest.approx(ref_m, abs=1e-13)


def test_smoothed_kruzkov_tends_to_kruzkov():
    F = burgers()
    s = np.linspace(-1, 1, 41)
    kp, _ = an.entropy_flux_pair(F, (1.0,), an.eta_kruzkov(0.2))
    errs = []
    for eps in (1e-3, 5e-4, 2.5e-4):
        qp, _ = an.entropy_flux_pair(F, (1.0,), an.eta_smoothed_kruzkov(0.2, eps))
        # entropy fluxes are defined up to a constant
        errs.append(float(np.max(np.abs((qp(s) - qp(0.0)) - (kp(s) - kp(0.0))))))
    # first order in eps; Richardson extrapolation removes the leading term
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.05)
    rich = 2 * errs[2] - errs[1]
    assert abs(rich) <= 1e-6


def test_non_convex_entropy_rejected():
    eta = an.Entropy("-u^2", lambda u: -np.asarray(u) ** 2, lambda u: -2 * np.asarray(u))
    with pytest.raises(ValueError, match="not convex"):
        an.entropy_flux_pair(burgers(), (1.0,), eta)


@pytest.mark.parametrize("name", ["box", "hat", "exponential"])
@pytest.mark.parametrize("flux,sr", [(burgers(), (-1.0, 1.0)), (lwr(), (0.0, 1.0)),
                                     (FluxSpec([np.sin], [np.cos], (-1.0, 1.0)), (-1.0, 1.0))])
def test_entropy_residual_nonpositive(name, flux, sr):
    g = Grid((256,), (1.0,))
    p = build_plan(flux.negated(), rescale(builtin_filter(name), (2 if name == "exponential" else 5) * g.h),
                   standard_measure("line"), g)
    ents = [an.eta_square(), an.eta_quartic(), an.eta_exp(), an.eta_smoothed_kruzkov(0.5 * sum(sr), 0.01),
            an.eta_kruzkov(0.3 * sr[0] + 0.7 * sr[1])]
    for seed in range(3):
        u = random_bv(g, seed, sr, 3.0)
        for eta in ents:
            assert float(np.max(an.entropy_residual(p, u, eta))) <= 1e-10


def test_linear_entropy_residual_is_zero():
    g = Grid((64, 64), (1.0, 1.0))
    p = build_plan(burgers((1.0, 0.5)).negated(), rescale(builtin_filter("hat"), 3 * g.h),
                   standard_measure("hexagon"), g)
    u = random_bv(g, 1, (-1, 1), 6.0)
    assert float(np.max(np.abs(an.entropy_residual(p, u, an.eta_linear())))) == 0.0


def test_exact_shock_and_rarefaction():
    shock = an.ExactSolution("burgers_shock", 1.0, 0.0, 0.0)
    # the last point sits in the fan of the reversed problem at the periodic seam
    x = np.array([0.2, 0.3, -1.0, -1.4])
    np.testing.assert_allclose(an.exact_evaluate(shock, x, 0.5), [1.0, 0.0, 1.0, 0.2])
    rare = an.ExactSolution("burgers_rarefaction", -1.0, 1.0, 0.0)
    np.testing.assert_allclose(an.exact_evaluate(rare, np.array([-0.6, -0.25, 0.1, 0.7]), 0.5),
                               [-1.0, -0.5, 0.2, 1.0])
    with pytest.raises(ValueError, match="leaves"):
        an.exact_evaluate(shock, x, 2.0)
    with pytest.raises(ValueError, match="u_l > u_r"):
        an.ExactSolution("burgers_shock", 0.0, 1.0)


def test_advection_exact_solution_wraps():
    sol = an.ExactSolution("advection_translate", domain=(0.0, 1.0), x0=0.5, speed=1.0,
                           u0=lambda x: np.sin(2 * np.pi * x))
    x = np.linspace(0, 1, 11)
    np.testing.assert_allclose(an.exact_evaluate(sol, x, 0.25), np.sin(2 * np.pi * (x - 0.25)), atol=1e-14)


def test_check_estimates_rows():
    g = Grid((128,), (1.0,))
    p = build_plan(burgers().negated(), rescale(builtin_filter("box"), 4 * g.h), standard_measure("line"), g)
    u0 = GridFunction(g, random_bv(g, 5, (-1, 1), 3.0))
    v0 = GridFunction(g, random_bv(g, 6, (-1, 1), 3.0))
    integ = Integrator("euler", None, 0.5, 0.2)
    tu, tv = run(p, u0, integ, [0.1]), run(p, v0, integ, [0.1])
    ms = an.check_estimates(tu, an.EstimateContext(p, u0, tv, v0, an.default_entropies((-1, 1), 3)))
    ids = {m.estimate_id for m in ms}
    assert {"supbnd", "BVbnd", "TLipbnd", "mass", "L1bnd", "entropy[u^2]"} <= ids
    assert an.worst_slack(ms) >= -1e-10


def test_fit_loglog():
    x = np.array([0.1, 0.05, 0.025])
    assert an.fit_loglog(x, 3 * x**0.5)[0] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        an.fit_loglog([1, 2], [0, 1])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["box", "hat"]))
def test_l1_contraction_property(seed, name):
    g = Grid((64,), (1.0,))
    p = build_plan(burgers().negated(), rescale(builtin_filter(name), 4 * g.h), standard_measure("line"), g)
    rng = np.random.default_rng(seed)
    u, v = rng.uniform(-1, 1, (2, 64))
    integ = Integrator("ssp_rk3", None, 0.5, 0.05)
    a = run(p, GridFunction(g, u), integ).final
    b = run(p, GridFunction(g, v), integ).final
    assert an.l1_distance(a, b) <= an.l1_distance(u, v, g) + 1e-12
    assert an.tv(a) <= an.tv(u, g) + 1e-12
