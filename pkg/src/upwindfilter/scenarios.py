"""Scenario runners behind the command line; each returns a :class:`ScenarioResult`."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis as an
from .config import ConfigError, ExperimentConfig
from .evolve import Integrator, run
from .flux import BURGERS, FluxSpec
from .geometry import Grid, GridFunction, standard_measure
from .operator import apply, apply_raw, build_plan
from . import resolvent as rv

FMT = "%.17g"


@dataclass
class ScenarioResult:
    scenario: str
    passed: bool = True
    metrics: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    files: list = field(default_factory=list)

    def require(self, name: str, ok: bool, detail: str = ""):
        if not ok:
            self.passed = False
            self.failures.append(f"{name}: {detail}" if detail else name)

    def summary(self) -> dict:
        return {"scenario": self.scenario, "passed": self.passed, "failures": self.failures,
                "metrics": self.metrics}


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return FMT % v
    return str(v)


def write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def snapshot_rows(u: GridFunction):
    g = u.grid
    if g.dim == 1:
        return ["x", "u"], zip(g.centers(), u.values)
    X, Y = g.centers()
    return ["x", "y", "u"], zip(X.ravel(), Y.ravel(), u.values.ravel())


def read_snapshot(path: Path, grid: Grid, t: float) -> GridFunction:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return GridFunction(grid, data[:, -1].reshape(grid.shape), t)


def write_margins(path: Path, margins):
    return write_csv(path, ["estimate_id", "t", "lhs", "rhs", "slack"],
                     [(m.estimate_id, float(m.t), float(m.lhs), float(m.rhs), float(m.slack)) for m in margins])


def _margin_check(res: ScenarioResult, margins):
    worst = an.worst_slack(margins)
    res.metrics["worst_slack"] = worst
    bad = sorted({m.estimate_id for m in margins if m.slack < -an.MARGIN_TOL})
    res.require("margins", not bad, f"negative slack for {', '.join(bad)}")


# ---------------------------------------------------------------------------

def scenario_run(cfg: ExperimentConfig, out: Path) -> ScenarioResult:
    res = ScenarioResult("run")
    grid = cfg.make_grid()
    plan = build_plan(cfg.operator_flux(), cfg.make_filter(), cfg.make_measure(), grid)
    u0 = cfg.initial_data(grid)
    it = cfg.integrator
    integ = Integrator(it["scheme"], it["dt"], it["safety"], it["t_end"])
    times = it["output_times"] or [0.0, it["t_end"]]
    traj = run(plan, u0, integ, times)
    # a second solution from shifted data for the L1 contraction check
    v0 = GridFunction(grid, 0.5 * (u0.values + np.roll(u0.values, grid.shape[0] // 3, axis=0)))
    partner = run(plan, v0, integ, times)
    ents = an.default_entropies(plan.flux.state_range)
    ctx = an.EstimateContext(plan, u0, partner, v0, ents)
    margins = an.check_estimates(traj, ctx)

    files = []
    for i, snap in enumerate(traj.snapshots):
        header, rows = snapshot_rows(snap)
        files.append(write_csv(out / f"snapshot_{i:04d}.csv", header, rows).name)
    index = {"config": cfg.to_dict(), "base_dir": str(cfg.base_dir), "times": traj.times,
             "files": files, "dt": traj.dt, "n_steps": traj.n_steps}
    (out / "trajectory.json").write_text(json.dumps(index, indent=2))
    write_margins(out / "margins.csv", margins)
    res.files = files + ["trajectory.json", "margins.csv"]
    res.metrics.update(dt=traj.dt, n_steps=traj.n_steps, final_time=traj.final.t,
                       mass_drift=abs(an.mass(traj.final) - an.mass(u0)))
    _margin_check(res, margins)
    return res


def _burgers_exact(cfg: ExperimentConfig) -> an.ExactSolution:
    fl = cfg.flux
    f = cfg.physical_flux()
    if not (f._profile is BURGERS and np.allclose(f._coeffs, [1.0]) and fl["form"] == "conservation"):
        raise ConfigError("flux: zero_filter_sweep needs the 1D Burgers flux u^2/2 in conservation form")
    ini = cfg.initial
    a = cfg.grid["origin"][0]
    L = cfg.grid["length"][0]
    x0 = ini["x0"] if ini["x0"] is not None else a + 0.5 * L
    ul, ur = float(ini["u_l"]), float(ini["u_r"])
    kind = "burgers_shock" if ul > ur else "burgers_rarefaction"
    try:
        return an.ExactSolution(kind, ul, ur, x0, (a, a + L))
    except ValueError as exc:
        raise ConfigError(f"initial: {exc}") from None


def scenario_zero_filter(cfg: ExperimentConfig, out: Path) -> ScenarioResult:
    res = ScenarioResult("zero_filter_sweep")
    sol = _burgers_exact(cfg)
    sc = cfg.scenario
    it = cfg.integrator
    r = an.zero_filter_study(cfg.physical_flux(), sol, sc["alphas"], it["t_end"],
                             cells_per_alpha=int(sc["cells_per_alpha"]), scheme=it["scheme"],
                             safety=it["safety"], filt=cfg.make_filter(alpha=1.0))
    rows = [(a, e, r.rate) for a, e in zip(r.alphas, r.errors)]
    write_csv(out / "sweep_summary.csv", ["alpha", "l1_error", "fitted_rate"], rows)
    write_margins(out / "margins.csv", r.envelope_margins())
    res.files = ["sweep_summary.csv", "margins.csv"]
    res.metrics.update(alphas=r.alphas, errors=r.errors, fitted_rate=r.rate, fitted_constant=r.constant,
                       monotone=r.monotone)
    res.require("fitted_rate", r.rate >= sc["min_rate"], f"{r.rate:.4f} < {sc['min_rate']}")
    res.require("monotone_error", r.monotone, "L1 error does not decrease with alpha")
    return res


def scenario_filter_stability(cfg: ExperimentConfig, out: Path) -> ScenarioResult:
    res = ScenarioResult("filter_stability_sweep")
    sc = cfg.scenario
    it = cfg.integrator
    a0, L = cfg.grid["origin"][0], cfg.grid["length"][0]
    F = cfg.operator_flux()
    rows, ratios = [], []
    for alpha in sc["alphas"]:
        N = int(round(L * sc["cells_per_alpha"] / alpha))
        grid = Grid((N,), (L,), (a0,))
        u0 = cfg.initial_data(grid)
        first = cfg.make_filter(alpha=alpha)
        second = cfg.make_filter(name=sc["second_filter"], alpha=alpha)
        lhs, rf = an.continuous_dependence_study(F, u0, first, second, it["t_end"], scheme=it["scheme"],
                                                 safety=it["safety"])
        ratio = lhs / rf if rf > 0 else math.inf
        ratios.append(ratio)
        rows.append((alpha, lhs, rf, ratio))
    slope, _ = an.fit_loglog(sc["alphas"], ratios)
    growth = -slope
    C = max(ratios)
    write_csv(out / "sweep_summary.csv", ["alpha", "lhs", "rhs_factor", "ratio"], rows)
    margins = [an.Margin("Phistab", it["t_end"], r[1], C * r[2]) for r in rows]
    write_margins(out / "margins.csv", margins)
    res.files = ["sweep_summary.csv", "margins.csv"]
    res.metrics.update(ratios=ratios, fitted_constant=C, growth_slope=growth, slope_vs_alpha=slope)
    res.require("growth_slope", growth <= sc["max_growth_slope"],
                f"{growth:.4f} > {sc['max_growth_slope']}")
    _margin_check(res, margins)
    return res


def _axis_flux(F: FluxSpec, axis: int) -> FluxSpec:
    if F._profile is None:
        raise ConfigError("flux: per-axis comparison needs a built-in flux")
    return FluxSpec.builtin(F._profile, [F._coeffs[axis]], F.state_range, F.lipschitz)


def per_axis_sum(F: FluxSpec, filt, grid: Grid, u: np.ndarray) -> np.ndarray:
    """Sum of 1D operators along rows and columns (the folded square measure, weight 1 each)."""
    out = np.zeros(grid.shape)
    for axis in (0, 1):
        g1 = Grid((grid.shape[axis],), (grid.lengths[axis],))
        plan = build_plan(_axis_flux(F, axis), filt, standard_measure("line"), g1)
        lines = np.moveaxis(u, axis, -1)
        vals = np.stack([apply(plan, line) for line in lines.reshape(-1, lines.shape[-1])])
        out += np.moveaxis(vals.reshape(lines.shape), -1, axis)
    return out


def scenario_stencil_equivalence(cfg: ExperimentConfig, out: Path) -> ScenarioResult:
    res = ScenarioResult("stencil_equivalence")
    grid = cfg.make_grid()
    F = cfg.operator_flux()
    filt = cfg.make_filter()
    tol = cfg.scenario["tolerance"] or 1e-12
    lo, hi = F.state_range
    u = np.random.default_rng(cfg.seed).uniform(lo, hi, grid.shape)
    tri = apply(build_plan(F, filt, standard_measure("triangle"), grid), u)
    hexa = apply(build_plan(F, filt, standard_measure("hexagon"), grid), u)
    sq = apply(build_plan(F, filt, standard_measure("square"), grid), u)
    axes = per_axis_sum(F, filt, grid, u)
    d_th = float(np.max(np.abs(tri - hexa)))
    d_sq = float(np.max(np.abs(sq - axes)))
    write_csv(out / "stencil_equivalence.csv", ["comparison", "max_abs_difference"],
              [("triangle_vs_hexagon", d_th), ("square_vs_axis_sum", d_sq)])
    res.files = ["stencil_equivalence.csv"]
    res.metrics.update(triangle_vs_hexagon=d_th, square_vs_axis_sum=d_sq, seed=cfg.seed)
    res.require("triangle_vs_hexagon", d_th <= tol, f"{d_th:.3g} > {tol:g}")
    res.require("square_vs_axis_sum", d_sq <= tol, f"{d_sq:.3g} > {tol:g}")
    return res


def _entropies(names, state_range):
    lo, hi = state_range
    ks = np.linspace(lo, hi, 7)[1:-1]
    table = {
        "u": lambda: [an.eta_linear()],
        "u^2": lambda: [an.eta_square()],
        "u^4": lambda: [an.eta_quartic()],
        "exp": lambda: [an.eta_exp()],
        "kruzkov": lambda: [an.eta_kruzkov(k) for k in ks],
        "smoothed_kruzkov": lambda: [an.eta_smoothed_kruzkov(k, 1e-3) for k in ks],
    }
    out = []
    for n in names:
        if n not in table:
            raise ConfigError(f"scenario.entropies: unknown entropy {n!r} (known: {', '.join(table)})")
        out += table[n]()
    return out


def scenario_entropy_audit(cfg: ExperimentConfig, out: Path) -> ScenarioResult:
    res = ScenarioResult("entropy_audit")
    grid = cfg.make_grid()
    plan = build_plan(cfg.operator_flux(), cfg.make_filter(), cfg.make_measure(), grid)
    ents = _entropies(cfg.scenario["entropies"] or ["u^2", "kruzkov"], plan.flux.state_range)
    tol = cfg.scenario["tolerance"] or 1e-10
    rows, worst, strict = [], -math.inf, math.inf
    for i in range(int(cfg.scenario["n_states"])):
        u = cfg.initial_data(grid, seed=cfg.seed + i)
        for e in ents:
            r = an.entropy_residual(plan, u.values, e)
            rows.append((i, e.name, float(r.max()), float(r.min())))
            worst = max(worst, float(r.max()))
            strict = min(strict, float(r.min()))
    write_csv(out / "entropy_audit.csv", ["state", "entropy", "max_residual", "min_residual"], rows)
    res.files = ["entropy_audit.csv"]
    res.metrics.update(max_residual=worst, min_residual=strict, strict_dissipation_seen=strict <= -1e-6)
    res.require("entropy_residual", worst <= tol, f"{worst:.3g} > {tol:g}")
    return res


def scenario_resolvent(cfg: ExperimentConfig, out: Path) -> ScenarioResult:
    res = ScenarioResult("resolvent_check")
    sc = cfg.scenario
    alpha = sc["alpha"] or 0.1
    Ns = sc["Ns"] or [128, 256, 512]
    a0, L = cfg.grid["origin"][0], cfg.grid["length"][0]
    rows, hs, cols = [], [], []
    for N in Ns:
        grid = Grid((int(N),), (L,), (a0,))
        x = grid.centers()
        k = 2 * np.pi / L
        v = np.sin(k * (x - a0))
        ops = rv.ExpOperators.build(alpha, grid)
        inv = rv.inverse_check(ops, v)
        rel = rv.relation_check(ops, v)
        avg = float(np.max(np.abs(rv.average_plus(ops, v) - rv.analytic_average_sine(alpha, k, x - a0))))
        h = grid.spacing[0]
        hs.append(h)
        cols.append(inv + rel + (avg,))
        rows.append((int(N), h) + inv + rel + (avg,))
    names = ["inverse_plus", "inverse_minus", "relation_plus", "relation_minus", "average_error"]
    cols = np.array(cols)
    rates = {n: an.fit_loglog(hs, cols[:, j])[0] for j, n in enumerate(names)}
    write_csv(out / "resolvent.csv", ["N", "h"] + names, rows)
    res.files = ["resolvent.csv"]
    res.metrics.update(alpha=alpha, rates=rates)
    for n, r in rates.items():
        res.require(f"rate[{n}]", r >= 1.9, f"{r:.3f} < 1.9")
    if sc["equivalence"]:
        F = cfg.operator_flux()
        try:
            rv._check_monotone(F)
        except ValueError:
            raise ConfigError("flux: the equivalence check needs a non-decreasing operator flux "
                              "(flux.form: operator with a positive advection speed), or set "
                              "scenario.equivalence: false") from None
        grid = cfg.make_grid()
        alpha_eq = cfg.filter["alpha"] or 16 * grid.spacing[0]
        T = cfg.integrator["t_end"] if cfg.integrator["t_end"] is not None else 0.1
        eq = rv.equivalence_run(F, cfg.initial_data(grid), alpha_eq, T, cfg.integrator["scheme"],
                                cfg.integrator["safety"])
        res.metrics.update(equivalence_l1=eq.l1_difference, equivalence_tolerance=eq.tolerance)
        res.require("equivalence", eq.passed, f"{eq.l1_difference:.3g} > {eq.tolerance:.3g}")
    return res


def operator_check(cfg: ExperimentConfig, out: Path) -> ScenarioResult:
    res = ScenarioResult("operator_check")
    grid = cfg.make_grid()
    plan = build_plan(cfg.operator_flux(), cfg.make_filter(), cfg.make_measure(), grid)
    u = cfg.initial_data(grid)
    a = apply(plan, u.values)
    b = apply_raw(plan, u.values)
    diff = np.abs(a - b)
    tol = cfg.scenario["tolerance"] or 1e-12
    if grid.dim == 1:
        header = ["x", "apply", "apply_raw", "abs_diff"]
        rows = zip(grid.centers(), a, b, diff)
    else:
        X, Y = grid.centers()
        header = ["x", "y", "apply", "apply_raw", "abs_diff"]
        rows = zip(X.ravel(), Y.ravel(), a.ravel(), b.ravel(), diff.ravel())
    write_csv(out / "operator_check.csv", header, rows)
    res.files = ["operator_check.csv"]
    m = float(diff.max())
    res.metrics.update(max_abs_difference=m, conservation=float(np.sum(a) * grid.cell_volume))
    res.require("apply_vs_apply_raw", m <= tol, f"{m:.3g} > {tol:g}")
    return res


def analyze_trajectory(traj_dir: Path, out: Path) -> ScenarioResult:
    """Recompute margins from snapshot CSVs and their ``trajectory.json`` index."""
    from .config import config_from_dict

    res = ScenarioResult("analyze")
    index_path = traj_dir / "trajectory.json"
    try:
        index = json.loads(index_path.read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"trajectory: cannot read {index_path}: {exc}") from None
    cfg = config_from_dict(index["config"], base_dir=index.get("base_dir"))
    grid = cfg.make_grid()
    plan = build_plan(cfg.operator_flux(), cfg.make_filter(), cfg.make_measure(), grid)
    snaps = [read_snapshot(traj_dir / f, grid, t) for f, t in zip(index["files"], index["times"])]
    from .evolve import Trajectory

    traj = Trajectory()
    for s in snaps:
        traj.append(s)
    u0 = snaps[0] if snaps[0].t == 0.0 else cfg.initial_data(grid)
    ctx = an.EstimateContext(plan, u0, entropies=an.default_entropies(plan.flux.state_range))
    margins = an.check_estimates(traj, ctx)
    write_margins(out / "margins.csv", margins)
    res.files = ["margins.csv"]
    res.metrics["n_snapshots"] = len(snaps)
    _margin_check(res, margins)
    return res


RUNNERS = {
    "run": scenario_run,
    "zero_filter_sweep": scenario_zero_filter,
    "filter_stability_sweep": scenario_filter_stability,
    "stencil_equivalence": scenario_stencil_equivalence,
    "entropy_audit": scenario_entropy_audit,
    "resolvent_check": scenario_resolvent,
}


def run_scenario(cfg: ExperimentConfig, out: Path | None = None) -> ScenarioResult:
    out = Path(out or cfg.output["dir"])
    out.mkdir(parents=True, exist_ok=True)
    return RUNNERS[cfg.scenario["kind"]](cfg, out)
