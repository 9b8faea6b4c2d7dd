"""Method-of-lines time stepping for ``u_t = aud^Phi F(u)``."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import GridFunction
from .operator import OperatorPlan, apply, lipschitz_bound

SCHEMES = ("euler", "ssp_rk2", "ssp_rk3")
RANGE_TOL = 1e-8


class StepBoundError(ValueError):
    """Requested time step exceeds ``safety / lipschitz_bound``."""


class BlowUpError(RuntimeError):
    """The state left its certified range or became non-finite.

    ``t`` and ``values`` hold the offending state for post-mortem inspection.
    """

    def __init__(self, message, t, values):
        super().__init__(message)
        self.t = t
        self.values = values


@dataclass
class Integrator:
    scheme: str = "euler"
    dt: float | None = None
    safety: float = 0.5
    t_end: float = 1.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not 0 < self.safety <= 1:
            raise ValueError("safety must lie in (0, 1]")
        if not self.t_end >= 0:
            raise ValueError("t_end must be non-negative")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")

    def max_dt(self, plan: OperatorPlan) -> float:
        return self.safety / lipschitz_bound(plan)

    def resolve_dt(self, plan: OperatorPlan) -> float:
        bound = self.max_dt(plan)
        if self.dt is None:
            return bound
        if self.dt > bound * (1 + 1e-12):
            raise StepBoundError(f"dt={self.dt:g} exceeds the stability bound {bound:g}")
        return self.dt


@dataclass
class Trajectory:
    """Snapshots at the requested output times, plus per-snapshot diagnostics."""

    snapshots: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    dt: float = 0.0
    n_steps: int = 0

    @property
    def times(self) -> list:
        return [s.t for s in self.snapshots]

    @property
    def final(self) -> GridFunction:
        return self.snapshots[-1]

    def append(self, snap: GridFunction, report=None):
        if self.snapshots and not snap.t > self.snapshots[-1].t:
            raise ValueError("trajectory times must be strictly increasing")
        self.snapshots.append(snap)
        if report is not None:
            self.reports.append(report)


def _rhs(plan, v):
    return apply(plan, v, check_range=False)


def _step_values(plan, u, dt, scheme):
    if scheme == "euler":
        return u + dt * _rhs(plan, u)
    if scheme == "ssp_rk2":
        u1 = u + dt * _rhs(plan, u)
        return 0.5 * u + 0.5 * (u1 + dt * _rhs(plan, u1))
    if scheme == "ssp_rk3":
        u1 = u + dt * _rhs(plan, u)
        u2 = 0.75 * u + 0.25 * (u1 + dt * _rhs(plan, u1))
        return u / 3.0 + (2.0 / 3.0) * (u2 + dt * _rhs(plan, u2))
    raise ValueError(f"unknown scheme {scheme!r}")


def _guard(plan, values, t):
    if not np.all(np.isfinite(values)):
        raise BlowUpError(f"non-finite values at t={t:.17g}", t, values)
    lo, hi = plan.flux.state_range
    vmin, vmax = float(values.min()), float(values.max())
    if vmin < lo - RANGE_TOL or vmax > hi + RANGE_TOL:
        raise BlowUpError(
            f"state [{vmin:.17g}, {vmax:.17g}] left the range {plan.flux.state_range} at t={t:.17g}; "
            "this contradicts the max principle (step bound violated?)", t, values)


def step(plan: OperatorPlan, u, dt: float, scheme: str = "euler", safety: float = 1.0):
    """One time step; accepts a GridFunction (time advanced) or a raw array."""
    bound = safety / lipschitz_bound(plan)
    if dt > bound * (1 + 1e-12):
        raise StepBoundError(f"dt={dt:g} exceeds the stability bound {bound:g}")
    if isinstance(u, GridFunction):
        plan.flux.check_range(u.values)
        out = _step_values(plan, u.values, dt, scheme)
        _guard(plan, out, u.t + dt)
        return GridFunction(u.grid, out, u.t + dt)
    u = np.asarray(u, dtype=float)
    plan.flux.check_range(u)
    out = _step_values(plan, u, dt, scheme)
    _guard(plan, out, dt)
    return out


def run(plan: OperatorPlan, u0: GridFunction, integrator: Integrator, output_times=None,
        diagnostics=None) -> Trajectory:
    """Integrate to ``integrator.t_end`` storing deep copies at ``output_times``.

    Steps have the fixed size ``dt``; the last step before each output time is
    shortened so snapshots land exactly on the requested times.
    ``diagnostics`` is an optional callable ``(plan, GridFunction) -> report``.
    """
    if u0.grid != plan.grid:
        raise ValueError("initial data lives on a different grid than the plan")
    plan.flux.check_range(u0.values)
    T = float(integrator.t_end)
    times = sorted(set([T] if output_times is None else [float(t) for t in output_times] + [T]))
    if times[0] < 0 or times[-1] > T * (1 + 1e-15):
        raise ValueError(f"output times must lie in [0, {T}]")
    dt = integrator.resolve_dt(plan)
    traj = Trajectory(dt=dt)

    t = float(u0.t)
    u = u0.values.copy()
    for target in times:
        while target - t > 1e-14 * max(1.0, T):
            last = target - t <= dt * (1 + 1e-12)
            h = target - t if last else dt
            u = _step_values(plan, u, h, integrator.scheme)
            t = target if last else t + h
            traj.n_steps += 1
            _guard(plan, u, t)
        snap = GridFunction(plan.grid, u.copy(), target)
        traj.append(snap, diagnostics(plan, snap) if diagnostics else None)
    return traj
