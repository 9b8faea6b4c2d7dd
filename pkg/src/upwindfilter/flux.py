"""Flux vectors, their monotone (Engquist-Osher) split and directional fluxes.

Sign convention: the evolution equation is ``u_t = aud F(u)``, whose local
limit is ``u_t = div F(u)``.  A conservation law ``u_t + div f(u) = 0`` is
therefore simulated with ``F = -f`` (see :meth:`FluxSpec.negated`).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

ArrayFn = Callable[[np.ndarray], np.ndarray]

DEFAULT_SAMPLES = 4096
SPLIT_TOL = 1e-12


class RangeViolation(ValueError):
    """A state left the certified invariant region of a flux."""


# ---------------------------------------------------------------------------
# scalar splits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Profile:
    """A registered scalar flux shape with a closed-form monotone split."""

    name: str
    f: ArrayFn
    df: ArrayFn
    f_plus: ArrayFn
    f_minus: ArrayFn
    kinks: tuple = ()


def _linear(u):
    return np.asarray(u, dtype=float) * 1.0


def _dlinear(u):
    return np.ones_like(np.asarray(u, dtype=float))


def _zero(u):
    return np.zeros_like(np.asarray(u, dtype=float))


def _burgers(u):
    u = np.asarray(u, dtype=float)
    return 0.5 * u * u


def _dburgers(u):
    return np.asarray(u, dtype=float) * 1.0


def _burgers_plus(u):
    v = np.maximum(np.asarray(u, dtype=float), 0.0)
    return 0.5 * v * v


def _burgers_minus(u):
    v = np.minimum(np.asarray(u, dtype=float), 0.0)
    return 0.5 * v * v


def _lwr(u):
    u = np.asarray(u, dtype=float)
    return u * (1.0 - u)


def _dlwr(u):
    return 1.0 - 2.0 * np.asarray(u, dtype=float)


def _lwr_plus(u):
    return _lwr(np.minimum(np.asarray(u, dtype=float), 0.5))


def _lwr_minus(u):
    return _lwr(np.maximum(np.asarray(u, dtype=float), 0.5)) - 0.25


LINEAR = Profile("linear", _linear, _dlinear, _linear, _zero, ())
BURGERS = Profile("burgers", _burgers, _dburgers, _burgers_plus, _burgers_minus, (0.0,))
LWR = Profile("lwr", _lwr, _dlwr, _lwr_plus, _lwr_minus, (0.5,))

_REGISTRY = {p.f: p for p in (LINEAR, BURGERS, LWR)}


@dataclass(frozen=True)
class ScalarSplit:
    """Non-decreasing part ``plus`` and non-increasing part ``minus`` of a scalar flux.

    ``dplus``/``dminus`` are the derivatives, ``kinks`` the points where they
    are not smooth (used by the entropy-flux quadrature).
    """

    plus: ArrayFn
    minus: ArrayFn
    dplus: ArrayFn
    dminus: ArrayFn
    kinks: tuple = ()

    def __call__(self, u):
        return self.plus(u) + self.minus(u)


class TabulatedSplit(ScalarSplit):
    """Split stored as node values with piecewise-linear evaluation."""

    def __init__(self, nodes, plus_values, minus_values):
        nodes = np.asarray(nodes, dtype=float)
        pv = np.asarray(plus_values, dtype=float)
        mv = np.asarray(minus_values, dtype=float)
        dp = np.diff(pv) / np.diff(nodes)
        dm = np.diff(mv) / np.diff(nodes)

        def slope(table):
            def d(u):
                idx = np.clip(np.searchsorted(nodes, u, side="right") - 1, 0, len(table) - 1)
                return table[idx]
            return d

        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "plus_values", pv)
        object.__setattr__(self, "minus_values", mv)
        super().__init__(
            plus=lambda u: np.interp(u, nodes, pv),
            minus=lambda u: np.interp(u, nodes, mv),
            dplus=slope(dp),
            dminus=slope(dm),
            kinks=tuple(nodes[1:-1]),
        )

    @classmethod
    def from_values(cls, nodes, values):
        """Exact split of the piecewise-linear interpolant through ``(nodes, values)``."""
        nodes = np.asarray(nodes, dtype=float)
        values = np.asarray(values, dtype=float)
        d = np.diff(values)
        pv = np.concatenate([[0.0], np.cumsum(np.maximum(d, 0.0))])
        mv = np.concatenate([[0.0], np.cumsum(np.minimum(d, 0.0))])
        i0 = _index_of_zero(nodes)
        return cls(nodes, pv - pv[i0], mv - mv[i0])


def _index_of_zero(nodes):
    hits = np.flatnonzero(nodes == 0.0)
    if hits.size == 0:
        raise ValueError("split table must contain the state u = 0")
    return int(hits[0])


def _grid_with_zero(lo, hi, n):
    s = np.linspace(lo, hi, n)
    if not np.any(s == 0.0):
        s = np.sort(np.append(s, 0.0))
    return s


def _scaled(profile: Profile, c: float) -> ScalarSplit:
    # split of c * p: a negative factor swaps the monotone parts
    if c > 0:
        return ScalarSplit(
            plus=lambda u: c * profile.f_plus(u),
            minus=lambda u: c * profile.f_minus(u),
            dplus=lambda u: c * np.maximum(profile.df(u), 0.0),
            dminus=lambda u: c * np.minimum(profile.df(u), 0.0),
            kinks=profile.kinks,
        )
    if c < 0:
        return ScalarSplit(
            plus=lambda u: c * profile.f_minus(u),
            minus=lambda u: c * profile.f_plus(u),
            dplus=lambda u: c * np.minimum(profile.df(u), 0.0),
            dminus=lambda u: c * np.maximum(profile.df(u), 0.0),
            kinks=profile.kinks,
        )
    return ScalarSplit(_zero, _zero, _zero, _zero, ())


def split_scalar(f: ArrayFn, fprime: ArrayFn | None, state_range, n_samples: int = DEFAULT_SAMPLES):
    """Increasing and decreasing parts of a scalar flux on ``state_range``.

    ``f_plus(u) = int_0^u max(0, f'(s)) ds`` and ``f_minus`` likewise with
    ``min``.  Registered built-in profiles return their closed forms; any
    other flux is integrated with the trapezoid rule on ``n_samples`` uniform
    samples of ``f'`` and evaluated by linear interpolation.

    Returns
    -------
    (f_plus, f_minus) : pair of vectorised callables
    """
    split = _split_scalar(f, fprime, state_range, n_samples)
    return split.plus, split.minus


def _split_scalar(f, fprime, state_range, n_samples=DEFAULT_SAMPLES) -> ScalarSplit:
    lo, hi = map(float, state_range)
    if not lo <= 0.0 <= hi:
        raise ValueError(f"state range [{lo}, {hi}] does not contain 0")
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    profile = _REGISTRY.get(f)
    if profile is not None:
        return _scaled(profile, 1.0)
    if fprime is None:
        raise ValueError("a derivative is required for a non-registered flux")
    s = _grid_with_zero(lo, hi, n_samples)
    try:
        d = np.asarray(fprime(s), dtype=float) * np.ones_like(s)
    except Exception as exc:  # noqa: BLE001 - reported with context
        raise ValueError(f"flux derivative evaluation failed: {exc}") from exc
    if not np.all(np.isfinite(d)):
        raise ValueError("flux derivative is not finite on the state range")
    ds = np.diff(s)
    dp, dm = np.maximum(d, 0.0), np.minimum(d, 0.0)
    pv = np.concatenate([[0.0], np.cumsum(0.5 * (dp[1:] + dp[:-1]) * ds)])
    mv = np.concatenate([[0.0], np.cumsum(0.5 * (dm[1:] + dm[:-1]) * ds)])
    i0 = _index_of_zero(s)
    return TabulatedSplit(s, pv - pv[i0], mv - mv[i0])


# ---------------------------------------------------------------------------
# flux vectors
# ---------------------------------------------------------------------------

class FluxSpec:
    """Flux vector ``F = (f_1, ..., f_d)`` restricted to a certified state range.

    Parameters
    ----------
    components, derivatives : sequences of vectorised callables
    state_range : (lo, hi), must contain 0
    lipschitz : Lipschitz constant of F on the range; estimated from sampled
        derivatives (with a 1e-3 safety factor) when omitted.
    """

    def __init__(
        self,
        components: Sequence[ArrayFn],
        derivatives: Sequence[ArrayFn] | None,
        state_range,
        lipschitz: float | None = None,
        name: str = "custom",
        n_samples: int = DEFAULT_SAMPLES,
        _profile: Profile | None = None,
        _coeffs=None,
        _table=None,
    ):
        lo, hi = map(float, state_range)
        if not lo <= 0.0 <= hi or not lo < hi:
            raise ValueError(f"state range [{lo}, {hi}] must be non-degenerate and contain 0")
        self.state_range = (lo, hi)
        self.name = name
        self.n_samples = n_samples
        self._profile = _profile
        self._coeffs = None if _coeffs is None else np.asarray(_coeffs, dtype=float)
        self._table = _table
        self._split_cache: dict = {}

        if _profile is not None:
            self.dim = len(self._coeffs)
            self.components = tuple(_scaled_fn(_profile.f, c) for c in self._coeffs)
            self.derivatives = tuple(_scaled_fn(_profile.df, c) for c in self._coeffs)
        else:
            if derivatives is None or len(derivatives) != len(components):
                raise ValueError("one derivative per flux component is required")
            self.dim = len(components)
            # enforce F(0) = 0 by shifting
            self.components = tuple(_shifted(f) for f in components)
            self.derivatives = tuple(derivatives)
        if self.dim not in (1, 2):
            raise ValueError("only d = 1 or d = 2 is supported")

        if lipschitz is None:
            lipschitz = self._estimate_lipschitz()
        elif lipschitz <= 0:
            raise ValueError("lipschitz must be positive")
        self.lipschitz = float(lipschitz)
        self._check_lipschitz()

    # -- construction helpers -------------------------------------------
    @classmethod
    def builtin(cls, profile: Profile, coeffs, state_range, lipschitz=None):
        coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
        return cls((), None, state_range, lipschitz, name=profile.name,
                   _profile=profile, _coeffs=coeffs)

    def negated(self) -> "FluxSpec":
        """The flux ``-F``; turns ``u_t + div f = 0`` into ``u_t = aud(-f)``."""
        if self._profile is not None:
            return FluxSpec.builtin(self._profile, -self._coeffs, self.state_range, self.lipschitz)
        if self._table is not None:
            nodes, values = self._table
            return table_flux(nodes, -values, self.state_range, self.lipschitz)
        return FluxSpec(
            [_scaled_fn(f, -1.0) for f in self.components],
            [_scaled_fn(f, -1.0) for f in self.derivatives],
            self.state_range, self.lipschitz, name=f"-{self.name}", n_samples=self.n_samples,
        )

    def __repr__(self):
        return f"FluxSpec({self.name!r}, dim={self.dim}, range={self.state_range}, L={self.lipschitz:g})"

    # -- evaluation ---------------------------------------------------------
    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return np.stack([f(u) * np.ones_like(u) for f in self.components], axis=-1)

    def along(self, n):
        """The scalar function ``u -> F(u) . n`` and its derivative."""
        n = np.asarray(n, dtype=float)

        def g(u):
            return sum(c * f(u) for c, f in zip(n, self.components))

        def dg(u):
            return sum(c * f(u) for c, f in zip(n, self.derivatives))

        return g, dg

    def in_range(self, u, tol=1e-8) -> bool:
        lo, hi = self.state_range
        u = np.asarray(u)
        return bool(u.min() >= lo - tol and u.max() <= hi + tol)

    def check_range(self, u, tol=1e-8):
        if not self.in_range(u, tol):
            u = np.asarray(u)
            raise RangeViolation(
                f"state [{u.min():.17g}, {u.max():.17g}] outside certified range {self.state_range}"
            )

    def _samples(self):
        lo, hi = self.state_range
        return np.linspace(lo, hi, self.n_samples)

    def _estimate_lipschitz(self):
        lo, hi = self.state_range
        if self._profile is not None:
            # profile derivatives are affine, so the extremes sit at the ends
            dmax = max(abs(float(self._profile.df(lo))), abs(float(self._profile.df(hi))))
            return float(np.linalg.norm(self._coeffs) * dmax)
        s = self._samples()
        d = np.stack([np.asarray(df(s), dtype=float) * np.ones_like(s) for df in self.derivatives])
        est = float(np.max(np.linalg.norm(d, axis=0)))
        return max(est, 1e-300) * (1.0 + 1e-3)

    def _check_lipschitz(self):
        s = self._samples()
        ds = np.diff(s)
        for f in self.components:
            v = np.asarray(f(s), dtype=float) * np.ones_like(s)
            worst = float(np.max(np.abs(np.diff(v)) / ds))
            if worst > self.lipschitz * (1 + 1e-9):
                raise ValueError(
                    f"lipschitz={self.lipschitz:g} is below the sampled slope {worst:g} of {self.name}"
                )

    # -- splits -----------------------------------------------------------
    def split(self, n) -> "DirectionalSplit":
        return directional_split(self, n)


def _scaled_fn(f, c):
    return lambda u: c * f(u)


def _shifted(f):
    f0 = float(np.asarray(f(np.array([0.0])), dtype=float).ravel()[0])
    if f0 == 0.0:
        return f
    return lambda u: f(u) - f0


def advection(speed=1.0, state_range=(-1.0, 1.0), lipschitz=None) -> FluxSpec:
    """``F(u) = c u`` with velocity ``c`` (scalar in 1D, 2-vector in 2D)."""
    return FluxSpec.builtin(LINEAR, speed, state_range, lipschitz)


def burgers(direction=1.0, state_range=(-1.0, 1.0), lipschitz=None) -> FluxSpec:
    """``F(u) = b u^2 / 2``."""
    return FluxSpec.builtin(BURGERS, direction, state_range, lipschitz)


def lwr(direction=1.0, state_range=(0.0, 1.0), lipschitz=None) -> FluxSpec:
    """Greenshields / LWR flux ``F(u) = b u (1 - u)``."""
    return FluxSpec.builtin(LWR, direction, state_range, lipschitz)


def table_flux(nodes, values, state_range=None, lipschitz=None) -> FluxSpec:
    """1D flux given by the piecewise-linear interpolant of a table."""
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    if nodes.ndim != 1 or nodes.shape != values.shape or nodes.size < 2:
        raise ValueError("flux table needs matching 1D columns with at least two rows")
    if np.any(np.diff(nodes) <= 0):
        raise ValueError("flux table nodes must be strictly increasing")
    if state_range is None:
        state_range = (min(nodes[0], 0.0), max(nodes[-1], 0.0))
    lo, hi = state_range
    if lo < nodes[0] or hi > nodes[-1]:
        raise ValueError("state range extends beyond the flux table")
    if not np.any(nodes == 0.0):
        v0 = np.interp(0.0, nodes, values)
        k = np.searchsorted(nodes, 0.0)
        nodes = np.insert(nodes, k, 0.0)
        values = np.insert(values, k, v0)
    values = values - values[_index_of_zero(nodes)]
    slopes = np.diff(values) / np.diff(nodes)

    def f(u):
        return np.interp(u, nodes, values)

    def df(u):
        idx = np.clip(np.searchsorted(nodes, u, side="right") - 1, 0, len(slopes) - 1)
        return slopes[idx]

    if lipschitz is None:
        lipschitz = float(np.max(np.abs(slopes)))
    return FluxSpec([f], [df], state_range, lipschitz, name="table", _table=(nodes, values))


def read_flux_csv(path, state_range=None, lipschitz=None) -> FluxSpec:
    """Load a 1D flux table from a CSV with columns ``u`` and ``f``."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = {k.strip(): k for k in (reader.fieldnames or [])}
        ukey = cols.get("u")
        fkey = cols.get("f") or cols.get("f(u)")
        if ukey is None or fkey is None:
            raise ValueError(f"{path}: flux table needs columns 'u' and 'f'")
        rows = [(float(r[ukey]), float(r[fkey])) for r in reader]
    u, f = np.array(rows).T
    return table_flux(u, f, state_range, lipschitz)


# ---------------------------------------------------------------------------
# directional splits and the EO flux
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DirectionalSplit:
    """Monotone parts of ``u -> F(u) . n`` for a unit direction ``n``."""

    direction: tuple
    g_plus: ArrayFn
    g_minus: ArrayFn
    dg_plus: ArrayFn
    dg_minus: ArrayFn
    state_range: tuple
    kinks: tuple = field(default=())

    def check_range(self, *states, tol=1e-8):
        lo, hi = self.state_range
        for s in states:
            s = np.asarray(s)
            if s.size and (s.min() < lo - tol or s.max() > hi + tol):
                raise RangeViolation(
                    f"state {s.min():.17g}..{s.max():.17g} outside certified range {self.state_range}"
                )

    def eo(self, a, b):
        """Engquist-Osher flux ``g_plus(a) + g_minus(b)`` (no range check)."""
        return self.g_plus(a) + self.g_minus(b)


def directional_split(flux: FluxSpec, n) -> DirectionalSplit:
    """Split of ``F . n``; cached on the flux per direction."""
    n = np.atleast_1d(np.asarray(n, dtype=float))
    if n.shape != (flux.dim,):
        raise ValueError(f"direction must have {flux.dim} components")
    if abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise ValueError(f"direction {tuple(n)} is not a unit vector")
    key = tuple(n.tolist())
    cached = flux._split_cache.get(key)
    if cached is not None:
        return cached

    if flux._profile is not None:
        sp = _scaled(flux._profile, float(np.dot(flux._coeffs, n)))
    elif flux._table is not None:
        nodes, values = flux._table
        sp = TabulatedSplit.from_values(nodes, n[0] * values)
    else:
        g, dg = flux.along(n)
        sp = _split_scalar(g, dg, flux.state_range, flux.n_samples)
    out = DirectionalSplit(key, sp.plus, sp.minus, sp.dplus, sp.dminus, flux.state_range, tuple(sp.kinks))
    flux._split_cache[key] = out
    return out


def eo_flux(split: DirectionalSplit, a, b):
    """Two-point EO flux along the split's direction, with a range check."""
    split.check_range(a, b)
    return split.eo(a, b)


def eo_antisymmetry_check(split_n: DirectionalSplit, split_minus_n: DirectionalSplit, a, b,
                          tol: float = 1e-12) -> bool:
    """Whether ``EO_{-n}(a, b) == -EO_n(b, a)`` within ``tol`` (elementwise for arrays)."""
    lhs = eo_flux(split_minus_n, a, b)
    rhs = -eo_flux(split_n, b, a)
    scale = 1.0 + np.maximum(np.abs(lhs), np.abs(rhs))
    return bool(np.all(np.abs(lhs - rhs) <= tol * scale))
