"""One-sided exponential averages ``A+-`` and their first-order inverses ``AA+- = -+alpha d/dx + I``.

Everything here is 1D and periodic.  ``A+`` averages forward
(``int_0^inf e^{-z/alpha}/alpha v(x + z) dz``), ``A-`` backward.  The
operator path of :mod:`upwindfilter.operator` with the exponential filter and
``F = f`` evolves ``u_t = (A+ f+(u))_x + (A- f-(u))_x``; applying ``AA+``
turns it into an equation for the unfiltered variable ``U+ = AA+ u``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import circulant

from .evolve import Integrator, run
from .filters import builtin_filter, rescale
from .flux import FluxSpec, directional_split
from .geometry import Grid, GridFunction, standard_measure
from .operator import apply, build_plan

TAIL_TOL = 1e-12


def exponential_weights(alpha: float, h: float, N: int) -> np.ndarray:
    """Cell integrals of ``e^{-z/alpha}/alpha`` for offsets ``0..N-1``, wrapped periodically.

    Offset 0 covers ``[0, h/2]``, offset ``j`` covers ``[(j-1/2)h, (j+1/2)h]``.
    The periodic images form a geometric series that is summed exactly.
    """
    q = h / alpha
    j = np.arange(N, dtype=float)
    c = np.exp(-j * q) * (2.0 * math.sinh(0.5 * q))
    c[0] = -math.expm1(-0.5 * q)
    wrap = 1.0 / -math.expm1(-N * q)
    c[1:] *= wrap
    c[0] += 2.0 * math.sinh(0.5 * q) * math.exp(-N * q) * wrap
    return c / c.sum()


@dataclass(frozen=True, eq=False)
class ExpOperators:
    """Dense periodic matrices for ``A+``, ``A-``, the centred derivative and ``AA+-``."""

    alpha: float
    grid: Grid
    weights: np.ndarray
    A_plus: np.ndarray
    A_minus: np.ndarray
    D: np.ndarray

    @classmethod
    def build(cls, alpha: float, grid: Grid) -> "ExpOperators":
        if grid.dim != 1:
            raise ValueError("the exponential resolvent is one-dimensional")
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        N, h = grid.shape[0], grid.spacing[0]
        c = exponential_weights(alpha, h, N)
        a_minus = circulant(c)  # (A- v)_i = sum_m c_m v_{i-m}
        a_plus = np.ascontiguousarray(a_minus.T)
        col = np.zeros(N)
        col[1], col[-1] = 0.5 / h, -0.5 / h
        D = circulant(col).T.copy()  # (D v)_i = (v_{i+1} - v_{i-1}) / 2h
        return cls(alpha, grid, c, a_plus, np.ascontiguousarray(a_minus), D)

    @property
    def AA_plus(self) -> np.ndarray:
        return -self.alpha * self.D + np.eye(self.grid.shape[0])

    @property
    def AA_minus(self) -> np.ndarray:
        return self.alpha * self.D + np.eye(self.grid.shape[0])

    def dx(self, v):
        return self.D @ _vals(v)


def _vals(v):
    return v.values if isinstance(v, GridFunction) else np.asarray(v, dtype=float)


def _like(v, out):
    return GridFunction(v.grid, out, v.t) if isinstance(v, GridFunction) else out


def average_plus(ops: ExpOperators, v):
    return _like(v, ops.A_plus @ _vals(v))


def average_minus(ops: ExpOperators, v):
    return _like(v, ops.A_minus @ _vals(v))


def inverse_plus(ops: ExpOperators, v):
    """``AA+ v = -alpha v_x + v``."""
    return _like(v, ops.AA_plus @ _vals(v))


def inverse_minus(ops: ExpOperators, v):
    return _like(v, ops.AA_minus @ _vals(v))


def analytic_average_sine(alpha: float, k: float, x, sign: int = +1):
    """``A+ sin(kx)`` (``sign=+1``) or ``A- sin(kx)`` (``sign=-1``) in closed form."""
    ka = k * alpha
    return (np.sin(k * x) + sign * ka * np.cos(k * x)) / (1.0 + ka * ka)


def inverse_check(ops: ExpOperators, v) -> tuple:
    """``(||AA+ A+ v - v||_inf, ||AA- A- v - v||_inf)``."""
    v = _vals(v)
    rp = ops.AA_plus @ (ops.A_plus @ v) - v
    rm = ops.AA_minus @ (ops.A_minus @ v) - v
    return float(np.max(np.abs(rp))), float(np.max(np.abs(rm)))


def relation_check(ops: ExpOperators, v) -> tuple:
    """``(||AA+ A- v - (2 A- v - v)||_inf, ||AA- A+ v - (2 A+ v - v)||_inf)``."""
    v = _vals(v)
    am, ap = ops.A_minus @ v, ops.A_plus @ v
    r1 = ops.AA_plus @ am - (2.0 * am - v)
    r2 = ops.AA_minus @ ap - (2.0 * ap - v)
    return float(np.max(np.abs(r1))), float(np.max(np.abs(r2)))


def _check_monotone(flux: FluxSpec, tol: float = 1e-12):
    sp = directional_split(flux, (1.0,))
    s = np.linspace(*flux.state_range, 2049)
    if np.max(np.abs(sp.g_minus(s))) > tol:
        raise ValueError("flux is not non-decreasing on its state range (f- does not vanish)")
    return sp


def unfiltered_system_step(ops: ExpOperators, flux: FluxSpec, u):
    """``dU+/dt = f(u)_x`` for a non-decreasing flux; ``u`` is the filtered variable."""
    if flux.dim != 1:
        raise ValueError("the unfiltered system is one-dimensional")
    sp = _check_monotone(flux)
    uv = _vals(u)
    flux.check_range(uv)
    return _like(u, ops.D @ sp.g_plus(uv))


def full_system_rhs(ops: ExpOperators, flux: FluxSpec, u):
    """``(dU+/dt, dU-/dt)`` of the unfiltered system for a general flux.

    ``dU+/dt = (f~(u) + 2 A- f-(u))_x`` and ``dU-/dt = (2 A+ f+(u) - f~(u))_x``
    with ``f~ = f+ - f-``.  Both follow from applying ``AA+-`` to the filtered
    equation and using ``AA- A+ v = 2 A+ v - v``.
    """
    sp = directional_split(flux, (1.0,))
    uv = _vals(u)
    flux.check_range(uv)
    fp, fm = sp.g_plus(uv) * np.ones_like(uv), sp.g_minus(uv) * np.ones_like(uv)
    ft = fp - fm
    dplus = ops.D @ (ft + 2.0 * (ops.A_minus @ fm))
    dminus = ops.D @ (2.0 * (ops.A_plus @ fp) - ft)
    return _like(u, dplus), _like(u, dminus)


def operator_rhs(flux: FluxSpec, alpha: float, grid: Grid, u):
    """The operator-module right-hand side with the exponential filter and ``F = f``."""
    plan = build_plan(flux, rescale(builtin_filter("exponential", TAIL_TOL), alpha),
                      standard_measure("line"), grid)
    return apply(plan, _vals(u))


@dataclass
class EquivalenceResult:
    l1_difference: float
    tolerance: float
    h: float
    dt: float
    n_steps: int

    @property
    def passed(self) -> bool:
        return self.l1_difference <= self.tolerance


def equivalence_run(flux: FluxSpec, u0: GridFunction, alpha: float, T: float,
                    scheme: str = "ssp_rk3", safety: float = 0.5) -> EquivalenceResult:
    """Filtered evolution versus the unfiltered variable ``U+`` for a non-decreasing flux.

    Path 1 evolves ``u`` with the operator (exponential filter, ``F = f``).
    Path 2 evolves ``U+ = AA+ u0`` by ``U+_t = f(u)_x`` with ``u = A+ U+``,
    using the same scheme and step.  Returns ``||u_1(T) - A+ U+(T)||_1``
    against the tolerance ``5 (h^2 + dt)``.
    """
    grid = u0.grid
    ops = ExpOperators.build(alpha, grid)
    _check_monotone(flux)
    plan = build_plan(flux, rescale(builtin_filter("exponential", TAIL_TOL), alpha),
                      standard_measure("line"), grid)
    integ = Integrator(scheme, None, safety, T)
    traj = run(plan, u0, integ)
    dt = traj.dt

    def rhs(U):
        return unfiltered_system_step(ops, flux, ops.A_plus @ U)

    U = ops.AA_plus @ u0.values
    t, n = 0.0, 0
    while T - t > 1e-14 * max(1.0, T):
        last = T - t <= dt * (1 + 1e-12)
        h = T - t if last else dt
        if scheme == "euler":
            U = U + h * rhs(U)
        elif scheme == "ssp_rk2":
            U1 = U + h * rhs(U)
            U = 0.5 * U + 0.5 * (U1 + h * rhs(U1))
        else:
            U1 = U + h * rhs(U)
            U2 = 0.75 * U + 0.25 * (U1 + h * rhs(U1))
            U = U / 3.0 + (2.0 / 3.0) * (U2 + h * rhs(U2))
        t = T if last else t + h
        n += 1
    u2 = ops.A_plus @ U
    hx = grid.spacing[0]
    diff = float(np.sum(np.abs(traj.final.values - u2)) * hx)
    return EquivalenceResult(diff, 5.0 * (hx * hx + dt), hx, dt, n)
