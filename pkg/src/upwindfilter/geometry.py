"""Direction measures on the unit sphere, periodic grids and shifted sampling."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

NORMALIZATION_TOL = 1e-10
SNAP_TOL = 1e-9


def normalization_deviation(directions, weights) -> float:
    """``max_ab |sum_i w_i n_i^a n_i^b - delta_ab|``."""
    n = np.atleast_2d(np.asarray(directions, dtype=float))
    w = np.asarray(weights, dtype=float)
    m = np.einsum("i,ia,ib->ab", w, n, n)
    return float(np.max(np.abs(m - np.eye(n.shape[1]))))


@dataclass(frozen=True, eq=False)
class DirectionMeasure:
    """Finite atomic measure ``w`` on ``S^{d-1}`` with identity second moment."""

    directions: np.ndarray
    weights: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        n = np.atleast_2d(np.asarray(self.directions, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if n.shape[0] != w.shape[0]:
            raise ValueError("one weight per direction is required")
        if n.shape[1] not in (1, 2):
            raise ValueError("only d = 1 or d = 2 is supported")
        if np.any(w <= 0):
            raise ValueError("direction weights must be positive")
        if np.any(np.abs(np.linalg.norm(n, axis=1) - 1.0) > 1e-12):
            raise ValueError("directions must be unit vectors")
        dev = normalization_deviation(n, w)
        if dev > NORMALIZATION_TOL:
            raise ValueError(f"second-moment normalisation violated by {dev:.3g}")
        n.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "directions", n)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    @property
    def total(self) -> float:
        return float(np.sum(self.weights))

    def __len__(self):
        return len(self.weights)


def validate_normalization(dm) -> float:
    """Deviation of a measure (or ``(directions, weights)`` pair) from the normalisation."""
    if isinstance(dm, (DirectionMeasure, FoldedMeasure)):
        return normalization_deviation(dm.directions, dm.weights)
    directions, weights = dm
    return normalization_deviation(directions, weights)


_S3 = math.sqrt(3.0) / 2.0


def standard_measure(name: str) -> DirectionMeasure:
    """``line``, ``square``, ``hexagon`` or ``triangle``."""
    if name == "line":
        return DirectionMeasure(np.array([[1.0], [-1.0]]), np.array([0.5, 0.5]), "line")
    if name == "square":
        n = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
        return DirectionMeasure(n, np.full(4, 0.5), "square")
    if name == "hexagon":
        # exact components so folded hexagon and triangle coincide bit for bit
        n = np.array([[1.0, 0.0], [0.5, _S3], [-0.5, _S3], [-1.0, 0.0], [-0.5, -_S3], [0.5, -_S3]])
        return DirectionMeasure(n, np.full(6, 1.0 / 3.0), "hexagon")
    if name == "triangle":
        n = np.array([[1.0, 0.0], [-0.5, _S3], [-0.5, -_S3]])
        return DirectionMeasure(n, np.full(3, 2.0 / 3.0), "triangle")
    raise ValueError(f"unknown direction measure {name!r}")


@dataclass(frozen=True, eq=False)
class FoldedMeasure:
    """``omega(U) = w(U) + w(-U)`` on the closed half-sphere (last coordinate >= 0)."""

    directions: np.ndarray
    weights: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sum(self.weights))

    def __len__(self):
        return len(self.weights)


def _canonical(n, tol=1e-12):
    # half-sphere representative; ties on the equator broken by earlier coordinates
    for c in n[::-1]:
        if c > tol:
            return n
        if c < -tol:
            return -n
    return n


def fold(dm: DirectionMeasure, tol: float = 1e-12) -> FoldedMeasure:
    """Merge antipodal atoms onto the half-sphere; output sorted by angle."""
    reps, ws = [], []
    for n, w in zip(dm.directions, dm.weights):
        c = _canonical(n, tol)
        for i, r in enumerate(reps):
            if np.max(np.abs(r - c)) <= tol:
                ws[i] = ws[i] + w
                break
        else:
            reps.append(c + 0.0)
            ws.append(float(w))
    reps = np.array(reps)
    if reps.shape[1] == 2:
        order = np.argsort(np.arctan2(reps[:, 1], reps[:, 0]), kind="stable")
    else:
        order = np.arange(len(reps))
    return FoldedMeasure(reps[order], np.array(ws)[order])


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Uniform periodic cell-centred grid in 1D or 2D."""

    shape: tuple
    lengths: tuple
    origin: tuple = None

    def __post_init__(self):
        shape = tuple(int(s) for s in np.atleast_1d(self.shape))
        lengths = tuple(float(x) for x in np.atleast_1d(self.lengths))
        if len(lengths) == 1 and len(shape) == 2:
            lengths = lengths * 2
        origin = self.origin
        origin = (0.0,) * len(shape) if origin is None else tuple(float(x) for x in np.atleast_1d(origin))
        if len(origin) == 1 and len(shape) == 2:
            origin = origin * 2
        if len(shape) not in (1, 2) or len(lengths) != len(shape) or len(origin) != len(shape):
            raise ValueError("grid shape, lengths and origin must all have 1 or 2 entries")
        if any(n < 4 for n in shape):
            raise ValueError("each axis needs at least 4 cells")
        if any(not L > 0 for L in lengths):
            raise ValueError("domain lengths must be positive")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "origin", origin)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def spacing(self) -> tuple:
        return tuple(L / n for L, n in zip(self.lengths, self.shape))

    @property
    def h(self) -> float:
        """Smallest spacing."""
        return min(self.spacing)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def shape2(self) -> tuple:
        return self.shape if self.dim == 2 else (self.shape[0], 1)

    def axis(self, i: int = 0) -> np.ndarray:
        n, L, x0 = self.shape[i], self.lengths[i], self.origin[i]
        return x0 + (np.arange(n) + 0.5) * (L / n)

    def centers(self):
        """Cell-centre coordinates: an array in 1D, an ``ij`` meshgrid pair in 2D."""
        if self.dim == 1:
            return self.axis(0)
        return np.meshgrid(self.axis(0), self.axis(1), indexing="ij")


@dataclass
class GridFunction:
    """Cell values of ``u(., t)`` on a grid."""

    grid: Grid
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function has non-finite values")

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy(), self.t)


# ---------------------------------------------------------------------------
# shifts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Stencil:
    """Bilinear periodic sampling at a fixed displacement.

    ``offset`` is the lower-left source index (reduced mod the grid shape);
    ``weights`` are (w00, w10, w01, w11) for the four surrounding cells.
    """

    offset: tuple
    weights: tuple = field(default=(1.0, 0.0, 0.0, 0.0))
    aligned: bool = True


def shift_stencil(grid: Grid, displacement) -> Stencil:
    """Stencil evaluating ``x -> u(x + displacement)`` on ``grid``."""
    d = np.atleast_1d(np.asarray(displacement, dtype=float))
    if d.shape != (grid.dim,):
        raise ValueError("displacement dimension does not match the grid")
    q = d / np.asarray(grid.spacing)
    if grid.dim == 1:
        q = np.array([q[0], 0.0])
    nx, ny = grid.shape2
    base, frac = [], []
    for qi in q:
        ri = round(qi)
        if abs(qi - ri) <= SNAP_TOL * max(1.0, abs(qi)):
            base.append(int(ri))
            frac.append(0.0)
        else:
            fl = math.floor(qi)
            base.append(int(fl))
            frac.append(float(qi - fl))
    offset = (base[0] % nx, base[1] % ny)
    fx, fy = frac
    if fx == 0.0 and fy == 0.0:
        return Stencil(offset)
    w = ((1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy)
    return Stencil(offset, w, False)


def apply_stencil(values2d: np.ndarray, st: Stencil) -> np.ndarray:
    """Gather ``values2d`` (shape ``(nx, ny)``) through a shift stencil."""
    ox, oy = st.offset
    a = np.roll(values2d, (-ox, -oy), axis=(0, 1))
    if st.aligned:
        return a
    w00, w10, w01, w11 = st.weights
    b = np.roll(a, -1, axis=0)
    c = np.roll(a, -1, axis=1)
    d = np.roll(b, -1, axis=1)
    return w00 * a + w10 * b + w01 * c + w11 * d


def sample_shift(u, n, r: float, grid: Grid | None = None) -> np.ndarray:
    """Values of ``x -> u(x + r n)``: exact index shift on the lattice, bilinear otherwise."""
    if isinstance(u, GridFunction):
        grid, vals = u.grid, u.values
    else:
        if grid is None:
            raise ValueError("a grid is required for raw arrays")
        vals = np.asarray(u, dtype=float)
    if r < 0:
        raise ValueError("shift distance must be non-negative")
    st = shift_stencil(grid, r * np.atleast_1d(np.asarray(n, dtype=float)))
    out = apply_stencil(vals.reshape(grid.shape2), st)
    return out.reshape(grid.shape)
