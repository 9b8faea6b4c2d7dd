"""Filter kernels ``Phi`` on [0, inf), their rescalings and moments."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy import integrate

TAIL_TOL = 1e-12


class OffLatticeWarning(UserWarning):
    """A derivative atom of the filter does not sit on a multiple of the grid spacing."""


@dataclass(frozen=True)
class Filter:
    """Non-negative, non-increasing kernel with unit mass.

    The ``base_*`` fields describe the unscaled profile; ``scale`` is the
    filter size ``alpha`` with ``Phi_alpha(r) = Phi(r / alpha) / alpha``.
    ``profile`` must be right-continuous so that ``Phi(b) - Phi(a)`` is the
    mass of ``Phi'`` on ``(a, b]``, atoms included.
    """

    name: str
    profile: Callable[[np.ndarray], np.ndarray]
    breakpoints: tuple
    base_atoms: tuple
    base_mass: float
    base_first_moment: float
    base_phi0: float
    base_support: float
    base_derivative: Callable[[np.ndarray], np.ndarray] | None = None
    scale: float = 1.0
    is_dirac: bool = False

    @property
    def alpha(self) -> float:
        return self.scale

    def density(self, r):
        r = np.asarray(r, dtype=float)
        if self.is_dirac:
            return np.zeros_like(r)
        return self.profile(r / self.scale) / self.scale

    __call__ = density

    def derivative_density(self, r):
        """Absolutely continuous part of ``Phi'``; atoms are in :attr:`atoms_of_derivative`."""
        r = np.asarray(r, dtype=float)
        if self.base_derivative is None:
            return np.zeros_like(r)
        return self.base_derivative(r / self.scale) / self.scale**2

    @property
    def atoms_of_derivative(self):
        return tuple((self.scale * r0, m / self.scale) for r0, m in self.base_atoms)

    @property
    def mass(self) -> float:
        return self.base_mass

    @property
    def first_moment(self) -> float:
        return self.scale * self.base_first_moment

    @property
    def phi_at_zero(self) -> float:
        return self.base_phi0 / self.scale

    @property
    def support_radius(self) -> float:
        return self.scale * self.base_support

    @property
    def scaled_breakpoints(self):
        return tuple(self.scale * b for b in self.breakpoints)


def _box(r):
    r = np.asarray(r, dtype=float)
    return np.where((r >= 0.0) & (r < 1.0), 1.0, 0.0)


def _hat(r):
    r = np.asarray(r, dtype=float)
    return np.where(r >= 0.0, np.maximum(2.0 * (1.0 - r), 0.0), 0.0)


def _dhat(r):
    r = np.asarray(r, dtype=float)
    return np.where((r >= 0.0) & (r < 1.0), -2.0, 0.0)


def _exp(r):
    r = np.asarray(r, dtype=float)
    return np.where(r >= 0.0, np.exp(-np.maximum(r, 0.0)), 0.0)


def _dexp(r):
    return -_exp(r)


def builtin_filter(name: str, tail_tol: float = TAIL_TOL) -> Filter:
    """``box`` (indicator of [0,1]), ``hat`` (``max(2(1-r), 0)``) or ``exponential`` (``e^{-r}``)."""
    if name == "box":
        return Filter("box", _box, (1.0,), ((1.0, -1.0),), 1.0, 0.5, 1.0, 1.0)
    if name == "hat":
        return Filter("hat", _hat, (1.0,), (), 1.0, 1.0 / 3.0, 2.0, 1.0, _dhat)
    if name == "exponential":
        return Filter("exponential", _exp, (), (), 1.0, 1.0, 1.0, math.log(1.0 / tail_tol), _dexp)
    raise ValueError(f"unknown filter {name!r}; expected box, hat or exponential")


def dirac() -> Filter:
    """The limit filter ``delta_0``; only meaningful for :func:`moment_distance`."""
    return Filter("dirac", lambda r: np.zeros_like(np.asarray(r, dtype=float)), (), (),
                  1.0, 0.0, math.inf, 0.0, is_dirac=True)


def rescale(phi: Filter, alpha: float) -> Filter:
    """``Phi_alpha(r) = Phi(r / alpha) / alpha``."""
    if not alpha > 0:
        raise ValueError(f"filter scale must be positive, got {alpha}")
    if phi.is_dirac:
        return phi
    return replace(phi, scale=phi.scale * alpha)


# ---------------------------------------------------------------------------
# tabulated filters
# ---------------------------------------------------------------------------

def tabulated_filter(r, values, atoms=None, name="table") -> Filter:
    """Piecewise-linear filter through ``(r_i, Phi_i)``, zero past the last node.

    A repeated ``r`` marks a jump.  ``atoms`` (location, mass) pairs, when
    given, must match the jumps of the table.
    """
    r = np.asarray(r, dtype=float)
    v = np.asarray(values, dtype=float).copy()
    if r.ndim != 1 or r.shape != v.shape or r.size < 2:
        raise ValueError("filter table needs matching 1D columns with at least two rows")
    if r[0] != 0.0:
        raise ValueError("filter table must start at r = 0")
    if np.any(np.diff(r) < 0):
        raise ValueError("filter table r column must be non-decreasing")
    if np.any(v < -1e-12):
        raise ValueError("filter values must be non-negative")
    v = np.maximum(v, 0.0)
    dv = np.diff(v)
    if np.any(dv > 1e-12):
        raise ValueError("filter must be non-increasing (violation above 1e-12)")
    for i in np.flatnonzero(dv > 0):
        v[i + 1] = v[i]

    seg = np.diff(r) > 0
    r0, r1, v0, v1 = r[:-1][seg], r[1:][seg], v[:-1][seg], v[1:][seg]
    mass = float(np.sum(0.5 * (v0 + v1) * (r1 - r0)))
    if abs(mass - 1.0) > 1e-10:
        raise ValueError(f"filter mass is {mass!r}, expected 1 within 1e-10")
    slope = (v1 - v0) / (r1 - r0)
    icpt = v0 - slope * r0
    first = float(np.sum(icpt * (r1**2 - r0**2) / 2 + slope * (r1**3 - r0**3) / 3))

    derived = []
    for i in np.flatnonzero(~seg):
        if v[i + 1] < v[i]:
            derived.append((float(r[i]), float(v[i + 1] - v[i])))
    if v[-1] > 0:
        derived.append((float(r[-1]), float(-v[-1])))
    derived = tuple(derived)
    if atoms is not None:
        given = tuple((float(a), float(m)) for a, m in atoms)
        ok = len(given) == len(derived) and all(
            abs(a - b) <= 1e-12 and abs(m - n) <= 1e-12 for (a, m), (b, n) in zip(sorted(given), sorted(derived))
        )
        if not ok:
            raise ValueError(f"declared atoms {given} do not match the table jumps {derived}")

    rr, vv = r.copy(), v.copy()
    last = r[-1]

    def profile(x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(rr, x, side="right") - 1
        inside = (x >= 0.0) & (x < last)
        idx = np.clip(idx, 0, len(rr) - 2)
        dr = rr[idx + 1] - rr[idx]
        frac = np.where(dr > 0, (x - rr[idx]) / np.where(dr > 0, dr, 1.0), 0.0)
        out = vv[idx] + (vv[idx + 1] - vv[idx]) * frac
        return np.where(inside, out, 0.0)

    def dprofile(x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(r0, x, side="right") - 1, 0, len(slope) - 1)
        inside = (x >= 0.0) & (x < last)
        return np.where(inside, slope[idx], 0.0)

    return Filter(name, profile, tuple(np.unique(r[1:])), derived, mass, first, float(v[0]),
                  float(last), dprofile)


def read_filter_csv(path, atoms=None) -> Filter:
    """Load a tabulated filter from a CSV with columns ``r`` and ``phi``."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = {k.strip().lower(): k for k in (reader.fieldnames or [])}
        rkey = cols.get("r")
        pkey = cols.get("phi") or cols.get("phi(r)") or cols.get("Φ(r)".lower())
        if rkey is None or pkey is None:
            raise ValueError(f"{path}: filter table needs columns 'r' and 'phi'")
        rows = [(float(x[rkey]), float(x[pkey])) for x in reader]
    r, v = np.array(rows).T
    return tabulated_filter(r, v, atoms)


# ---------------------------------------------------------------------------
# moments and discretisation
# ---------------------------------------------------------------------------

def moment_distance(phi: Filter, psi: Filter, rtol: float = 1e-10) -> float:
    """``int_0^inf r |Phi(r) - Psi(r)| dr`` by adaptive quadrature.

    A Dirac filter contributes ``r Psi(r) = 0``.
    """
    if phi.is_dirac and psi.is_dirac:
        return 0.0
    if phi.is_dirac:
        return psi.first_moment
    if psi.is_dirac:
        return phi.first_moment
    if phi == psi:
        return 0.0
    R = max(phi.support_radius, psi.support_radius)
    cuts = {0.0, R}
    for f in (phi, psi):
        cuts.update(b for b in f.scaled_breakpoints if 0 < b < R)
        cuts.update(a for a, _ in f.atoms_of_derivative if 0 < a < R)
    cuts = sorted(cuts)

    def integrand(x):
        return x * abs(float(phi.density(x)) - float(psi.density(x)))

    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        val, _ = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=rtol, limit=400)
        total += val
    return total


def cell_edges(h: float, K: int):
    """Left/right edges of the radial cells ``(0, 3h/2], ((k-1/2)h, (k+1/2)h]``."""
    k = np.arange(1, K + 1, dtype=float)
    left = (k - 0.5) * h
    left[0] = 0.0
    right = (k + 0.5) * h
    return left, right


def derivative_cell_weights(phi: Filter, h: float, K: int | None = None, warn: bool = True):
    """Cell integrals ``psi_k`` of ``Phi'`` for radial nodes ``r_k = k h``, k = 1..K.

    The first cell absorbs ``(0, h/2]`` so no weight sits at ``r = 0``.
    Atoms go wholly to the cell that contains them.  Every ``psi_k <= 0``
    and their sum is ``-Phi(0+)`` up to the truncated tail.
    """
    if not h > 0:
        raise ValueError("spacing must be positive")
    if phi.is_dirac or not math.isfinite(phi.phi_at_zero):
        raise ValueError("filter with unbounded Phi(0) cannot be discretised")
    R = phi.support_radius
    if K is None:
        K = max(1, int(math.ceil(R / h - 1e-9)))
    if K * h < R * (1 - 1e-12):
        raise ValueError(f"K*h = {K * h:g} does not cover the filter support {R:g}")
    if warn:
        for a, _ in phi.atoms_of_derivative:
            m = a / h
            if abs(m - round(m)) > 1e-9 * max(1.0, m):
                warnings.warn(f"atom off-lattice: derivative atom at r={a:g} is not a multiple of h={h:g}",
                              OffLatticeWarning, stacklevel=2)
    left, right = cell_edges(h, K)
    upper = phi.density(left)
    upper[0] = phi.phi_at_zero
    psi = phi.density(right) - upper
    return np.minimum(psi, 0.0)
