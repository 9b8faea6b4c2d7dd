"""Experiment configuration: strict YAML parsing, validation and object construction."""
from __future__ import annotations

import copy
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .filters import OffLatticeWarning, builtin_filter, read_filter_csv, rescale
from .flux import FluxSpec, advection, burgers, lwr, read_flux_csv
from .flux import BURGERS, LINEAR, LWR
from .geometry import DirectionMeasure, Grid, GridFunction, standard_measure


class ConfigError(ValueError):
    """Invalid configuration; the message names the key and the violated constraint."""


SCENARIOS = ("run", "zero_filter_sweep", "filter_stability_sweep", "stencil_equivalence",
             "entropy_audit", "resolvent_check")

# allowed keys per section, with defaults (None = required or optional without default)
_SCHEMA = {
    "flux": {"name": "burgers", "params": {}, "state_range": None, "lipschitz": None, "table": None,
             "form": "conservation"},
    "filter": {"name": "box", "alpha": None, "table": None, "atoms": None, "tail_tol": 1e-12,
               "exact": False},
    "measure": {"name": None, "atoms": None},
    "grid": {"dim": 1, "N": None, "length": 1.0, "origin": 0.0},
    "integrator": {"scheme": "euler", "safety": 0.5, "dt": None, "t_end": None, "output_times": None},
    "initial": {"kind": "riemann", "u_l": 1.0, "u_r": 0.0, "x0": None, "amp": 1.0, "freq": 1,
                "offset": 0.0, "path": None, "seed": None, "tv_budget": 2.0, "n_pieces": 16},
    "scenario": {"kind": "run", "alphas": None, "cells_per_alpha": 8, "min_rate": 0.5,
                 "second_filter": "hat", "max_growth_slope": 0.1, "n_states": 5, "entropies": None,
                 "tolerance": None, "Ns": None, "alpha": None, "equivalence": True},
    "output": {"dir": "out"},
}
_TOP = set(_SCHEMA) | {"seed", "threads", "name"}
_FLUX_PARAMS = {"burgers": {"direction"}, "advection": {"speed"}, "lwr": {"direction"}, "table": set()}


@dataclass
class ExperimentConfig:
    flux: dict
    filter: dict
    measure: dict
    grid: dict
    integrator: dict
    initial: dict
    scenario: dict
    output: dict
    seed: int = 0
    threads: int | None = None
    name: str = "experiment"
    base_dir: Path = field(default_factory=Path.cwd)
    raw: dict = field(default_factory=dict)

    # -- derived objects ---------------------------------------------------
    @property
    def dim(self) -> int:
        return int(self.grid["dim"])

    def make_grid(self) -> Grid:
        g = self.grid
        return Grid(tuple(g["N"]), tuple(g["length"]), tuple(g["origin"]))

    def physical_flux(self) -> FluxSpec:
        return _build_flux(self)

    def operator_flux(self) -> FluxSpec:
        """``F`` fed to the operator: ``-f`` for conservation-form input, ``f`` otherwise."""
        f = self.physical_flux()
        return f.negated() if self.flux["form"] == "conservation" else f

    def make_filter(self, name: str | None = None, alpha: float | None = None):
        fc = self.filter
        alpha = fc["alpha"] if alpha is None else alpha
        name = name or fc["name"]
        if name == "table":
            base = read_filter_csv(self._path(fc["table"]), fc["atoms"])
        else:
            base = builtin_filter(name, fc["tail_tol"])
        return rescale(base, alpha)

    def make_measure(self) -> DirectionMeasure:
        m = self.measure
        if m["atoms"] is not None:
            dirs = [a["direction"] for a in m["atoms"]]
            ws = [a["weight"] for a in m["atoms"]]
            return DirectionMeasure(np.array(dirs, dtype=float), np.array(ws, dtype=float))
        return standard_measure(m["name"])

    def initial_data(self, grid: Grid | None = None, seed: int | None = None) -> GridFunction:
        return make_initial(self, grid or self.make_grid(), seed)

    def _path(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)


def _err(key, msg):
    raise ConfigError(f"{key}: {msg}")


def _merge(section: str, given) -> dict:
    if given is None:
        given = {}
    if not isinstance(given, dict):
        _err(section, "must be a mapping")
    schema = _SCHEMA[section]
    unknown = sorted(set(given) - set(schema))
    if unknown:
        _err(f"{section}.{unknown[0]}", f"unknown key (allowed: {', '.join(sorted(schema))})")
    out = copy.deepcopy(schema)
    out.update(copy.deepcopy(given))
    return out


def _num(key, v, positive=False, allow_none=False):
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _err(key, f"expected a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        _err(key, "must be finite")
    if positive and not v > 0:
        _err(key, f"must be positive, got {v}")
    return v


def _per_axis(key, v, dim, cast):
    seq = v if isinstance(v, (list, tuple)) else [v] * dim
    if len(seq) != dim:
        _err(key, f"expected {dim} entries, got {len(seq)}")
    return [cast(key, x) for x in seq]


def parse_config(path) -> ExperimentConfig:
    """Read and validate a YAML experiment file."""
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: invalid YAML: {exc}") from None
    return config_from_dict(data or {}, base_dir=path.parent)


def config_from_dict(data: dict, base_dir=None) -> ExperimentConfig:
    if not isinstance(data, dict):
        _err("config", "top level must be a mapping")
    unknown = sorted(set(data) - _TOP)
    if unknown:
        _err(unknown[0], f"unknown key (allowed: {', '.join(sorted(_TOP))})")
    sec = {k: _merge(k, data.get(k)) for k in _SCHEMA}
    cfg = ExperimentConfig(**sec, seed=int(data.get("seed", 0) or 0), threads=data.get("threads"),
                           name=str(data.get("name", "experiment")),
                           base_dir=Path(base_dir) if base_dir else Path.cwd(), raw=copy.deepcopy(data))
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig):
    g = cfg.grid
    if g["dim"] not in (1, 2):
        _err("grid.dim", "must be 1 or 2")
    d = g["dim"]
    if g["N"] is None:
        _err("grid.N", "is required")

    def _int(key, v):
        if isinstance(v, bool) or not isinstance(v, int) or v < 4:
            _err(key, f"must be an integer >= 4, got {v!r}")
        return v

    g["N"] = _per_axis("grid.N", g["N"], d, _int)
    g["length"] = _per_axis("grid.length", g["length"], d, lambda k, v: _num(k, v, positive=True))
    g["origin"] = _per_axis("grid.origin", g["origin"], d, lambda k, v: _num(k, v))

    fl = cfg.flux
    if fl["name"] not in _FLUX_PARAMS:
        _err("flux.name", f"must be one of {sorted(_FLUX_PARAMS)}")
    if fl["form"] not in ("conservation", "operator"):
        _err("flux.form", "must be 'conservation' (u_t + div f = 0) or 'operator' (u_t = aud F)")
    if not isinstance(fl["params"], dict):
        _err("flux.params", "must be a mapping")
    bad = sorted(set(fl["params"]) - _FLUX_PARAMS[fl["name"]])
    if bad:
        _err(f"flux.params.{bad[0]}", f"not a parameter of the {fl['name']} flux")
    if fl["name"] == "table":
        if fl["table"] is None:
            _err("flux.table", "a CSV path is required for a tabulated flux")
        if d != 1:
            _err("flux.table", "tabulated fluxes are one-dimensional")
    if fl["state_range"] is not None:
        sr = fl["state_range"]
        if not isinstance(sr, (list, tuple)) or len(sr) != 2:
            _err("flux.state_range", "must be a pair [lo, hi]")
        lo, hi = (_num("flux.state_range", x) for x in sr)
        if not lo <= 0 <= hi or not lo < hi:
            _err("flux.state_range", f"[{lo}, {hi}] must contain 0 and be non-degenerate")
        fl["state_range"] = [lo, hi]
    _num("flux.lipschitz", fl["lipschitz"], positive=True, allow_none=True)

    fc = cfg.filter
    if fc["name"] not in ("box", "hat", "exponential", "table"):
        _err("filter.name", "must be box, hat, exponential or table")
    if fc["name"] == "table" and fc["table"] is None:
        _err("filter.table", "a CSV path is required for a tabulated filter")
    kind = cfg.scenario["kind"]
    if fc["alpha"] is None and kind not in ("zero_filter_sweep", "filter_stability_sweep", "resolvent_check"):
        _err("filter.alpha", "is required")
    if fc["alpha"] is not None:
        fc["alpha"] = _num("filter.alpha", fc["alpha"], positive=True)
    fc["tail_tol"] = _num("filter.tail_tol", fc["tail_tol"], positive=True)
    if not fc["tail_tol"] < 1:
        _err("filter.tail_tol", "must be below 1")

    m = cfg.measure
    if m["name"] is None and m["atoms"] is None:
        m["name"] = "line" if d == 1 else "square"
    if m["name"] is not None and m["atoms"] is not None:
        _err("measure", "give either name or atoms, not both")
    if m["name"] is not None and m["name"] not in ("line", "square", "hexagon", "triangle"):
        _err("measure.name", "must be line, square, hexagon or triangle")
    try:
        dm = cfg.make_measure()
    except (ValueError, KeyError, TypeError) as exc:
        _err("measure", str(exc))
    if dm.dim != d:
        _err("measure", f"measure is {dm.dim}D but grid.dim is {d}")

    it = cfg.integrator
    if it["scheme"] not in ("euler", "ssp_rk2", "ssp_rk3"):
        _err("integrator.scheme", "must be euler, ssp_rk2 or ssp_rk3")
    it["safety"] = _num("integrator.safety", it["safety"], positive=True)
    if it["safety"] > 1:
        _err("integrator.safety", "must lie in (0, 1]")
    it["dt"] = _num("integrator.dt", it["dt"], positive=True, allow_none=True)
    if it["t_end"] is None and kind in ("run", "zero_filter_sweep", "filter_stability_sweep"):
        _err("integrator.t_end", "is required for this scenario")
    if it["t_end"] is not None:
        it["t_end"] = _num("integrator.t_end", it["t_end"])
        if it["t_end"] < 0:
            _err("integrator.t_end", "must be non-negative")
    if it["output_times"] is not None:
        ts = [_num("integrator.output_times", t) for t in it["output_times"]]
        if any(t < 0 or (it["t_end"] is not None and t > it["t_end"]) for t in ts):
            _err("integrator.output_times", "must lie in [0, t_end]")
        it["output_times"] = sorted(set(ts))

    ini = cfg.initial
    if ini["kind"] not in ("riemann", "sine", "table", "random_bv"):
        _err("initial.kind", "must be riemann, sine, table or random_bv")
    if ini["kind"] == "table" and ini["path"] is None:
        _err("initial.path", "a CSV path is required for tabulated initial data")
    ini["tv_budget"] = _num("initial.tv_budget", ini["tv_budget"], positive=True)

    sc = cfg.scenario
    if sc["kind"] not in SCENARIOS:
        _err("scenario.kind", f"must be one of {', '.join(SCENARIOS)}")
    if sc["alphas"] is not None:
        sc["alphas"] = [_num("scenario.alphas", a, positive=True) for a in sc["alphas"]]
    if sc["kind"] in ("zero_filter_sweep", "filter_stability_sweep"):
        if d != 1:
            _err("grid.dim", f"{sc['kind']} runs in 1D")
        if not sc["alphas"]:
            _err("scenario.alphas", "a list of filter sizes is required")
        if sc["kind"] == "zero_filter_sweep" and len(sc["alphas"]) < 2:
            _err("scenario.alphas", "at least two sizes are needed for a rate fit")
        if sc["kind"] == "zero_filter_sweep" and ini["kind"] != "riemann":
            _err("initial.kind", "zero_filter_sweep compares against an exact Riemann solution")
    if sc["kind"] == "stencil_equivalence" and d != 2:
        _err("grid.dim", "stencil_equivalence compares 2D measures")
    if sc["kind"] == "resolvent_check" and d != 1:
        _err("grid.dim", "resolvent_check is one-dimensional")

    # cross-field checks on the operator configuration
    if fc["alpha"] is not None and kind not in ("resolvent_check",):
        try:
            filt = cfg.make_filter()
        except (OSError, ValueError) as exc:
            _err("filter", str(exc))
        half = 0.5 * min(g["length"])
        if not filt.support_radius < half:
            _err("filter.alpha", f"support exceeds half domain ({filt.support_radius:g} >= {half:g})")
        grid = cfg.make_grid()
        for a, _ in filt.atoms_of_derivative:
            for h in set(grid.spacing):
                q = a / h
                if abs(q - round(q)) > 1e-9 * max(1.0, q):
                    if fc["exact"]:
                        _err("filter.alpha", f"atom off-lattice: alpha={a:g} is not a multiple of h={h:g}")
                    warnings.warn(f"atom off-lattice: derivative atom at r={a:g} is not a multiple "
                                  f"of h={h:g}", OffLatticeWarning, stacklevel=3)
    try:
        cfg.physical_flux()
    except (OSError, ValueError) as exc:
        _err("flux", str(exc))


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def _build_flux(cfg: ExperimentConfig) -> FluxSpec:
    fl = cfg.flux
    d = cfg.dim
    p = fl["params"]
    sr = fl["state_range"]
    lip = fl["lipschitz"]
    name = fl["name"]
    if name == "table":
        return read_flux_csv(cfg._path(fl["table"]), sr, lip)
    default_sr = (0.0, 1.0) if name == "lwr" else (-1.0, 1.0)
    sr = tuple(sr) if sr is not None else default_sr
    key = "speed" if name == "advection" else "direction"
    coeff = p.get(key, 1.0 if d == 1 else [1.0] * d)
    coeffs = np.atleast_1d(np.asarray(coeff, dtype=float))
    if coeffs.shape != (d,):
        raise ValueError(f"flux.params.{key} must have {d} components")
    if d == 1:
        factory = {"burgers": burgers, "advection": advection, "lwr": lwr}[name]
        return factory(float(coeffs[0]), sr, lip)
    profile = {"burgers": BURGERS, "advection": LINEAR, "lwr": LWR}[name]
    return FluxSpec.builtin(profile, coeffs, sr, lip)


def random_bv(grid: Grid, seed: int, state_range, tv_budget: float, n_pieces: int = 16) -> np.ndarray:
    """Seeded piecewise-constant data with periodic index TV equal to ``tv_budget``.

    1D data has ``n_pieces`` constant runs; 2D data is a tensor block pattern
    and the budget covers the sum of both axis variations.
    """
    rng = np.random.default_rng(seed)
    lo, hi = state_range
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    if grid.dim == 1:
        N = grid.shape[0]
        n = min(n_pieces, N)
        cuts = np.sort(rng.choice(np.arange(1, N), size=n - 1, replace=False))
        levels = rng.uniform(-1.0, 1.0, size=n)
        v = np.repeat(levels, np.diff(np.concatenate([[0], cuts, [N]])))
        tv0 = float(np.sum(np.abs(np.roll(v, -1) - v)))
    else:
        nx, ny = grid.shape
        bx = np.sort(rng.choice(np.arange(1, nx), size=min(n_pieces, nx) - 1, replace=False))
        by = np.sort(rng.choice(np.arange(1, ny), size=min(n_pieces, ny) - 1, replace=False))
        levels = rng.uniform(-1.0, 1.0, size=(len(bx) + 1, len(by) + 1))
        ix = np.searchsorted(bx, np.arange(nx), side="right")
        iy = np.searchsorted(by, np.arange(ny), side="right")
        v = levels[np.ix_(ix, iy)]
        tv0 = float(np.sum(np.abs(np.roll(v, -1, 0) - v)) + np.sum(np.abs(np.roll(v, -1, 1) - v)))
    if tv0 == 0:
        return np.full(grid.shape, mid)
    scale = tv_budget / (half * tv0)
    if scale * np.max(np.abs(v)) > 1.0:
        raise ValueError(f"tv_budget {tv_budget:g} cannot be met inside the state range "
                         f"(at most {half * tv0 / np.max(np.abs(v)):.4g} for this seed)")
    return mid + half * scale * v


def make_initial(cfg: ExperimentConfig, grid: Grid, seed: int | None = None) -> GridFunction:
    ini = cfg.initial
    sr = cfg.physical_flux().state_range
    kind = ini["kind"]
    if kind == "riemann":
        x0 = ini["x0"]
        if x0 is None:
            x0 = grid.origin[0] + 0.5 * grid.lengths[0]
        x = grid.centers() if grid.dim == 1 else grid.centers()[0]
        vals = np.where(x < x0, float(ini["u_l"]), float(ini["u_r"]))
    elif kind == "sine":
        xs = [grid.centers()] if grid.dim == 1 else grid.centers()
        phase = sum(2 * np.pi * ini["freq"] * (x - o) / L for x, o, L in zip(xs, grid.origin, grid.lengths))
        vals = ini["offset"] + ini["amp"] * np.sin(phase)
    elif kind == "table":
        data = np.loadtxt(cfg._path(ini["path"]), delimiter=",", skiprows=1, ndmin=2)
        vals = data[:, -1]
        if vals.size != int(np.prod(grid.shape)):
            raise ConfigError(f"initial.path: {vals.size} values for a grid of {grid.shape}")
        vals = vals.reshape(grid.shape)
    else:
        s = ini["seed"] if ini["seed"] is not None else cfg.seed
        s = s if seed is None else seed
        try:
            vals = random_bv(grid, int(s), sr, ini["tv_budget"], int(ini["n_pieces"]))
        except ValueError as exc:
            raise ConfigError(f"initial.tv_budget: {exc}") from None
    lo, hi = sr
    if vals.min() < lo - 1e-12 or vals.max() > hi + 1e-12:
        raise ConfigError(f"initial: data [{vals.min():g}, {vals.max():g}] outside flux state range {sr}")
    return GridFunction(grid, vals.astype(float), 0.0)
