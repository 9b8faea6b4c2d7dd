import math

import numpy as np
import pytest

from upwindfilter.analysis import fit_loglog
from upwindfilter.flux import advection, burgers, lwr
from upwindfilter.geometry import Grid, GridFunction
from upwindfilter.resolvent import (ExpOperators, analytic_average_sine, exponential_weights,
                                    full_system_rhs, inverse_check, operator_rhs, relation_check,
                                    unfiltered_system_step)

K = 2 * math.pi


def ops_for(N, alpha=0.1):
    g = Grid((N,), (1.0,))
    return ExpOperators.build(alpha, g), g.centers()


def test_weights_sum_to_one():
    for N, a in ((128, 0.1), (512, 0.01), (64, 0.5)):
        w = exponential_weights(a, 1.0 / N, N)
        assert w.sum() == pytest.approx(1.0, abs=1e-14)
        assert np.all(w >= 0)


def test_average_matches_closed_form():
    errs = []
    hs = []
    for N in (128, 256, 512):
        ops, x = ops_for(N)
        v = np.sin(K * x)
        ep = np.max(np.abs(ops.A_plus @ v - analytic_average_sine(0.1, K, x, +1)))
        em = np.max(np.abs(ops.A_minus @ v - analytic_average_sine(0.1, K, x, -1)))
        errs.append(max(ep, em))
        hs.append(1.0 / N)
    assert fit_loglog(hs, errs)[0] >= 1.9


def test_minus_average_is_transpose():
    ops, _ = ops_for(64)
    np.testing.assert_array_equal(ops.A_minus, ops.A_plus.T)


def test_identities_second_order():
    res, hs = [], []
    for N in (128, 256, 512):
        ops, x = ops_for(N)
        v = np.sin(K * x) + 0.3 * np.cos(3 * K * x)
        res.append(inverse_check(ops, v) + relation_check(ops, v))
        hs.append(1.0 / N)
    res = np.array(res)
    for i in range(4):
        assert fit_loglog(hs, res[:, i])[0] >= 1.9
    assert res[-1].max() < 1e-2


def test_full_system_consistent_with_operator():
    # AA+- applied to the filtered right-hand side, O(h^2) apart
    for F in (burgers(), lwr()):
        errs, hs = [], []
        for N in (256, 512, 1024):
            g = Grid((N,), (1.0,))
            x = g.centers()
            lo, hi = F.state_range
            u = 0.5 * (lo + hi) + 0.4 * (hi - lo) * np.sin(K * x)
            ops = ExpOperators.build(1 / 64, g)
            rhs = operator_rhs(F, 1 / 64, g, u)
            dp, dm = full_system_rhs(ops, F, u)
            errs.append(max(np.max(np.abs(dp - ops.AA_plus @ rhs)), np.max(np.abs(dm - ops.AA_minus @ rhs))))
            hs.append(1.0 / N)
        assert fit_loglog(hs, errs)[0] >= 1.8


def test_unfiltered_step_needs_monotone_flux():
    ops, x = ops_for(64)
    with pytest.raises(ValueError, match="non-decreasing"):
        unfiltered_system_step(ops, burgers(), 0.5 * np.sin(K * x))
    out = unfiltered_system_step(ops, advection(1.0), GridFunction(Grid((64,), (1.0,)), np.sin(K * x)))
    assert isinstance(out, GridFunction)
