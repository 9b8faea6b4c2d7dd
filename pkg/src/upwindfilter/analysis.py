"""Diagnostics, entropy fluxes, exact Burgers/advection solutions and estimate checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .evolve import Integrator, Trajectory, run
from .filters import Filter, moment_distance
from .flux import DirectionalSplit, FluxSpec, directional_split
from .geometry import DirectionMeasure, Grid, GridFunction, standard_measure
from .operator import OperatorPlan, apply, apply_fields, build_plan, flux_fields

MARGIN_TOL = 1e-10


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def _vals(u):
    return u.values if isinstance(u, GridFunction) else np.asarray(u, dtype=float)


def l1_distance(u, v, grid: Grid | None = None) -> float:
    """``h^d sum |u - v|``."""
    if isinstance(u, GridFunction) and isinstance(v, GridFunction):
        if u.grid != v.grid:
            raise ValueError("grid mismatch in l1_distance")
        grid = u.grid
    grid = grid or (u.grid if isinstance(u, GridFunction) else getattr(v, "grid", None))
    if grid is None:
        raise ValueError("a grid is needed to weight the sum")
    a, b = _vals(u), _vals(v)
    if a.shape != b.shape:
        raise ValueError("grid mismatch in l1_distance")
    return float(np.sum(np.abs(a - b)) * grid.cell_volume)


def tv_axes(u, grid: Grid | None = None) -> tuple:
    """Periodic total variation per axis, each scaled by the transverse cell size."""
    vals = _vals(u)
    grid = grid or getattr(u, "grid", None)
    if vals.ndim == 1:
        return (float(np.sum(np.abs(np.roll(vals, -1) - vals))),)
    hx, hy = grid.spacing if grid is not None else (1.0, 1.0)
    tx = float(np.sum(np.abs(np.roll(vals, -1, axis=0) - vals))) * hy
    ty = float(np.sum(np.abs(np.roll(vals, -1, axis=1) - vals))) * hx
    return (tx, ty)


def tv(u, grid: Grid | None = None) -> float:
    """Periodic total variation (in 2D the sum of the per-axis variations)."""
    return float(sum(tv_axes(u, grid)))


def mass(u: GridFunction) -> float:
    return float(np.sum(u.values) * u.grid.cell_volume)


# ---------------------------------------------------------------------------
# entropies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Entropy:
    """Convex entropy ``eta`` with derivative ``deta``.

    ``breakpoints`` lists states where ``deta`` is not smooth or varies
    quickly; the entropy-flux quadrature splits its intervals there.
    """

    name: str
    eta: Callable
    deta: Callable
    breakpoints: tuple = ()
    kruzkov_k: float | None = None
    linear: bool = False


def eta_linear() -> Entropy:
    return Entropy("u", lambda u: np.asarray(u, dtype=float) * 1.0,
                   lambda u: np.ones_like(np.asarray(u, dtype=float)), linear=True)


def eta_square() -> Entropy:
    return Entropy("u^2", lambda u: np.asarray(u, dtype=float) ** 2, lambda u: 2.0 * np.asarray(u, dtype=float))


def eta_quartic() -> Entropy:
    return Entropy("u^4", lambda u: np.asarray(u, dtype=float) ** 4, lambda u: 4.0 * np.asarray(u, dtype=float) ** 3)


def eta_exp() -> Entropy:
    return Entropy("exp(u)", lambda u: np.exp(u), lambda u: np.exp(u))


def eta_kruzkov(k: float) -> Entropy:
    k = float(k)
    return Entropy(f"|u-{k:g}|", lambda u: np.abs(np.asarray(u, dtype=float) - k),
                   lambda u: np.sign(np.asarray(u, dtype=float) - k), (k,), kruzkov_k=k)


def eta_smoothed_kruzkov(k: float, eps: float) -> Entropy:
    """``sqrt((u-k)^2 + eps^2)``, a smooth convex approximation of ``|u-k|``."""
    k, eps = float(k), float(eps)
    bps = [k] + [k + s * eps * 2.0**m for m in range(-2, 40) for s in (-1, 1) if eps * 2.0**m < 4]
    return Entropy(
        f"sqrt((u-{k:g})^2+{eps:g}^2)",
        lambda u: np.sqrt((np.asarray(u, dtype=float) - k) ** 2 + eps**2),
        lambda u: (np.asarray(u, dtype=float) - k) / np.sqrt((np.asarray(u, dtype=float) - k) ** 2 + eps**2),
        tuple(sorted(bps)),
    )


def check_convex(eta: Entropy, state_range, n: int = 2001, tol: float = 1e-10):
    """Reject entropies whose derivative decreases anywhere on a sample grid."""
    if eta.kruzkov_k is not None:
        return
    s = np.linspace(*state_range, n)
    d = np.asarray(eta.deta(s), dtype=float)
    slope = np.diff(d) / np.diff(s)
    if np.any(slope < -tol * max(1.0, float(np.max(np.abs(d))))):
        raise ValueError(f"entropy {eta.name} is not convex on {state_range}")


_GL_X, _GL_W = np.polynomial.legendre.leggauss(32)


def _gl(fn, a, b):
    """Gauss-Legendre integral of ``fn`` from ``a`` to ``b`` (arrays of equal shape)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    s = mid[..., None] + half[..., None] * _GL_X
    return half * np.sum(_GL_W * fn(s), axis=-1)


class _QuadratureFlux:
    """``q(u) = int_0^u eta'(s) g'(s) ds`` accurate to rounding on piecewise-smooth data."""

    def __init__(self, dg, deta, state_range, breakpoints):
        lo, hi = state_range
        pts = {lo, hi, 0.0}
        pts.update(float(b) for b in breakpoints if lo < b < hi)
        self.nodes = np.array(sorted(pts))
        self.f = lambda s: np.asarray(deta(s), dtype=float) * np.asarray(dg(s), dtype=float)
        seg = _gl(self.f, self.nodes[:-1], self.nodes[1:])
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        self.cum = cum - cum[np.flatnonzero(self.nodes == 0.0)[0]]

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        flat = u.ravel()
        idx = np.clip(np.searchsorted(self.nodes, flat, side="right") - 1, 0, len(self.nodes) - 2)
        left = self.nodes[idx]
        return (self.cum[idx] + _gl(self.f, left, flat)).reshape(u.shape)


def entropy_flux_pair(flux: FluxSpec, n, eta: Entropy, split: DirectionalSplit | None = None):
    """Entropy fluxes ``(q+, q-)`` along ``n`` with ``dq+- = eta' dg+-``.

    Kruzkov entropies use the closed form ``sgn(u-k)(g(u) - g(k))``; other
    entropies integrate ``eta' g'`` with Gauss-Legendre between breakpoints,
    normalised to ``q(0) = 0``.
    """
    sp = split or directional_split(flux, n)
    if eta.linear:
        return sp.g_plus, sp.g_minus
    if eta.kruzkov_k is not None:
        k = eta.kruzkov_k
        gpk, gmk = float(sp.g_plus(np.array(k))), float(sp.g_minus(np.array(k)))

        def q_plus(u):
            u = np.asarray(u, dtype=float)
            return np.sign(u - k) * (sp.g_plus(u) - gpk)

        def q_minus(u):
            u = np.asarray(u, dtype=float)
            return np.sign(u - k) * (sp.g_minus(u) - gmk)

        return q_plus, q_minus
    check_convex(eta, flux.state_range)
    bps = tuple(sp.kinks) + tuple(eta.breakpoints)
    return (_QuadratureFlux(sp.dg_plus, eta.deta, flux.state_range, bps),
            _QuadratureFlux(sp.dg_minus, eta.deta, flux.state_range, bps))


def entropy_residual(plan: OperatorPlan, u, eta: Entropy):
    """``eta'(u) aud F(u)`` minus the same stencil applied to the entropy fluxes; pointwise <= 0."""
    vals = _vals(u)
    plan.flux.check_range(vals)
    gp, gm = flux_fields(plan, vals)
    base = apply_fields(plan, gp, gm)
    qp = np.empty_like(gp)
    qm = np.empty_like(gm)
    v2 = vals.reshape(plan.grid.shape2)
    for d, sp in enumerate(plan.splits):
        fp, fm = entropy_flux_pair(plan.flux, sp.direction, eta, sp)
        qp[d] = fp(v2)
        qm[d] = fm(v2)
    res = np.asarray(eta.deta(vals), dtype=float) * base - apply_fields(plan, qp, qm)
    return GridFunction(u.grid, res, u.t) if isinstance(u, GridFunction) else res


def entropy_total(u: GridFunction, eta: Entropy) -> float:
    return float(np.sum(eta.eta(u.values)) * u.grid.cell_volume)


def default_entropies(state_range, n_kruzkov: int = 10) -> tuple:
    lo, hi = state_range
    ks = np.linspace(lo, hi, n_kruzkov + 2)[1:-1]
    return (eta_square(),) + tuple(eta_kruzkov(k) for k in ks)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

@dataclass
class DiagnosticsReport:
    t: float
    sup: float
    inf: float
    tv: tuple
    mass: float
    l1_norm: float
    entropies: dict = field(default_factory=dict)
    margins: dict = field(default_factory=dict)


def diagnose(plan: OperatorPlan | None, u: GridFunction, entropies=()) -> DiagnosticsReport:
    vals = u.values
    rep = DiagnosticsReport(
        t=u.t, sup=float(vals.max()), inf=float(vals.min()), tv=tv_axes(u),
        mass=mass(u), l1_norm=float(np.sum(np.abs(vals)) * u.grid.cell_volume),
        entropies={e.name: entropy_total(u, e) for e in entropies},
    )
    return rep


# ---------------------------------------------------------------------------
# exact solutions
# ---------------------------------------------------------------------------

def burgers_riemann(ul: float, ur: float, xi, t: float):
    """Entropy solution of the Burgers Riemann problem at offset ``xi`` from the jump."""
    xi = np.asarray(xi, dtype=float)
    if t <= 0 or ul == ur:
        return np.where(xi < 0, ul, ur) * 1.0
    if ul > ur:
        s = 0.5 * (ul + ur)
        return np.where(xi < s * t, ul, ur) * 1.0
    return np.clip(xi / t, ul, ur)


def _wave_extent(ul, ur, t):
    if ul > ur:
        s = 0.5 * (ul + ur) * t
        return s, s
    return min(ul, ur) * t, max(ul, ur) * t


@dataclass(frozen=True)
class ExactSolution:
    """Reference solutions of ``u_t + f(u)_x = 0`` on a periodic interval ``[a, b)``.

    Riemann data are periodic: ``u_l`` on ``[a, x0)`` and ``u_r`` on
    ``[x0, b)``, so a second Riemann problem sits at the seam ``b == a``.
    Evaluation is valid while neither wave reaches the midpoint between them.
    """

    kind: str
    u_l: float = 1.0
    u_r: float = 0.0
    x0: float = 0.0
    domain: tuple = (-1.5, 1.5)
    speed: float = 1.0
    u0: Callable | None = None

    def __post_init__(self):
        if self.kind not in ("advection_translate", "burgers_shock", "burgers_rarefaction"):
            raise ValueError(f"unknown exact solution kind {self.kind!r}")
        if self.kind == "burgers_shock" and not self.u_l > self.u_r:
            raise ValueError("shock data must satisfy u_l > u_r (Lax admissibility)")
        if self.kind == "burgers_rarefaction" and not self.u_l < self.u_r:
            raise ValueError("rarefaction data must satisfy u_l < u_r")
        if self.kind == "advection_translate" and self.u0 is None:
            raise ValueError("advection needs an initial profile u0")
        a, b = self.domain
        if not a < self.x0 < b:
            raise ValueError("x0 must lie inside the domain")

    @property
    def shock_speed(self) -> float:
        return 0.5 * (self.u_l + self.u_r)


def exact_evaluate(sol: ExactSolution, x, t: float) -> np.ndarray:
    """Exact values at points ``x`` (1D) and time ``t >= 0``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    x = np.asarray(x, dtype=float)
    a, b = sol.domain
    L = b - a
    if sol.kind == "advection_translate":
        return np.asarray(sol.u0(a + np.mod(x - sol.speed * t - a, L)), dtype=float)
    ul, ur, x0 = sol.u_l, sol.u_r, sol.x0
    m1, m2 = 0.5 * (a + x0), 0.5 * (x0 + b)
    lo, hi = _wave_extent(ul, ur, t)
    if not (m1 < x0 + lo and x0 + hi < m2):
        raise ValueError(f"the wave from x0 leaves ({m1:g}, {m2:g}) before t={t:g}")
    slo, shi = _wave_extent(ur, ul, t)
    if not (-(b - m2) < slo and shi < m1 - a):
        raise ValueError(f"the wave from the periodic seam reaches the primary wave before t={t:g}")
    xm = a + np.mod(x - a, L)
    primary = (xm >= m1) & (xm < m2)
    xi_seam = np.where(xm >= m2, xm - b, xm - a)
    return np.where(primary, burgers_riemann(ul, ur, xm - x0, t), burgers_riemann(ur, ul, xi_seam, t))


def exact_gridfunction(sol: ExactSolution, grid: Grid, t: float) -> GridFunction:
    return GridFunction(grid, exact_evaluate(sol, grid.centers(), t), t)


# ---------------------------------------------------------------------------
# estimates
# ---------------------------------------------------------------------------

@dataclass
class Margin:
    estimate_id: str
    t: float
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


@dataclass
class EstimateContext:
    """Inputs for :func:`check_estimates`.

    ``partner`` is a second trajectory (other initial data, same plan) for
    the L1 contraction check; ``entropies`` are integrated and must not grow.
    """

    plan: OperatorPlan
    u0: GridFunction
    partner: Trajectory | None = None
    partner_u0: GridFunction | None = None
    entropies: tuple = ()


def check_estimates(traj: Trajectory, ctx: EstimateContext) -> list:
    """Margins (``slack = rhs - lhs``) for the a-priori estimates at every snapshot."""
    plan, u0 = ctx.plan, ctx.u0
    tv0 = tv(u0)
    lo0, hi0 = float(u0.values.min()), float(u0.values.max())
    m0 = mass(u0)
    tlip = 2.0 * plan.measure.total * plan.flux.lipschitz * tv0
    ent0 = {e.name: entropy_total(u0, e) for e in ctx.entropies}
    out = []
    for i, snap in enumerate(traj.snapshots):
        t = snap.t
        v = snap.values
        out.append(Margin("supbnd", t, max(float(v.max()) - hi0, lo0 - float(v.min())), 0.0))
        out.append(Margin("BVbnd", t, tv(snap), tv0))
        out.append(Margin("TLipbnd", t, float(np.sum(np.abs(apply(plan, v))) * snap.grid.cell_volume), tlip))
        out.append(Margin("mass", t, abs(mass(snap) - m0), 0.0))
        if ctx.partner is not None:
            other = ctx.partner.snapshots[i]
            if abs(other.t - t) > 1e-12:
                raise ValueError("partner trajectory has different output times")
            out.append(Margin("L1bnd", t, l1_distance(snap, other), l1_distance(u0, ctx.partner_u0)))
        for e in ctx.entropies:
            out.append(Margin(f"entropy[{e.name}]", t, entropy_total(snap, e), ent0[e.name]))
    return out


def worst_slack(margins) -> float:
    return min((m.slack for m in margins), default=math.inf)


# ---------------------------------------------------------------------------
# rate studies
# ---------------------------------------------------------------------------

def fit_loglog(x, y) -> tuple:
    """Least-squares slope and intercept of ``log y`` against ``log x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit needs positive data")
    slope, icpt = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope), float(icpt)


@dataclass
class ZeroFilterResult:
    alphas: list
    errors: list
    rate: float
    constant: float
    monotone: bool
    tv0: float
    T: float
    final: list = field(default_factory=list)
    margins: list = field(default_factory=list)

    def envelope_margins(self) -> list:
        """``error <= C |u0|_BV sqrt(alpha T)`` with the fitted worst-case ``C``."""
        return [Margin("zero_filter", self.T, e, self.constant * self.tv0 * math.sqrt(a * self.T))
                for a, e in zip(self.alphas, self.errors)]


def zero_filter_study(flux: FluxSpec, sol: ExactSolution, alphas, T: float, filter_name: str = "box",
                      cells_per_alpha: int = 8, scheme: str = "ssp_rk3", safety: float = 0.5,
                      filt: Filter | None = None) -> ZeroFilterResult:
    """L1 error of the non-local solution against the exact local one as ``alpha -> 0``.

    ``flux`` is the physical flux ``f`` of ``u_t + f(u)_x = 0``; the grid
    spacing is ``alpha / cells_per_alpha``.
    """
    from .filters import builtin_filter, rescale

    base = filt or builtin_filter(filter_name)
    a, b = sol.domain
    L = b - a
    F = flux.negated()
    errs, finals = [], []
    tv0 = None
    for alpha in alphas:
        N = int(round(L * cells_per_alpha / alpha))
        grid = Grid((N,), (L,), (a,))
        plan = build_plan(F, rescale(base, alpha), standard_measure("line"), grid)
        u0 = exact_gridfunction(sol, grid, 0.0)
        tv0 = tv(u0) if tv0 is None else tv0
        traj = run(plan, u0, Integrator(scheme, None, safety, T))
        ref = exact_gridfunction(sol, grid, T)
        errs.append(l1_distance(traj.final, ref))
        finals.append(traj.final)
    rate, _ = fit_loglog(alphas, errs)
    C = max(e / (tv0 * math.sqrt(al * T)) for al, e in zip(alphas, errs))
    order = np.argsort(alphas)[::-1]
    e_sorted = np.asarray(errs)[order]
    monotone = bool(np.all(np.diff(e_sorted) < 0))
    return ZeroFilterResult(list(alphas), errs, rate, C, monotone, tv0, T, finals)


def oleinik_max(u: GridFunction) -> float:
    """Largest forward difference quotient ``(u_{j+1} - u_j) / h``."""
    v = u.values
    return float(np.max((np.roll(v, -1) - v) / u.grid.spacing[0]))


def continuous_dependence_study(flux: FluxSpec, u0: GridFunction, first, second, T: float,
                                measure: DirectionMeasure | None = None, scheme: str = "ssp_rk3",
                                safety: float = 0.5) -> tuple:
    """``(lhs, rhs_factor)`` with ``lhs = ||u^Phi(T) - u^Psi(T)||_1`` and
    ``rhs_factor = sqrt(T * int r |Phi_alpha - Psi_beta| dr)``.

    ``first`` and ``second`` are already-scaled filters; ``flux`` is ``F``.
    """
    dm = measure or standard_measure("line" if u0.grid.dim == 1 else "square")
    finals = []
    for filt in (first, second):
        plan = build_plan(flux, filt, dm, u0.grid)
        finals.append(run(plan, u0, Integrator(scheme, None, safety, T)).final)
    lhs = l1_distance(finals[0], finals[1])
    rhs_factor = math.sqrt(T * moment_distance(first, second))
    return lhs, rhs_factor
