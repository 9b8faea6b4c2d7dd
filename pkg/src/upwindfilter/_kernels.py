"""Backend selection for the operator's stencil sum.

The compiled extension is used when importable; ``UPWINDFILTER_BACKEND=python``
forces the numpy fallback.  ``UPWINDFILTER_THREADS`` sets the worker count of
the compiled path (rows are split into contiguous chunks, each cell's sum has
a fixed order, so results do not depend on the thread count).
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import _kernel_py

try:
    from . import _kernel_ext
except ImportError:  # pragma: no cover - depends on the build
    _kernel_ext = None

_MIN_CELLS_PER_THREAD = 2048
_pool: ThreadPoolExecutor | None = None
_pool_size = 0


def available_backends() -> tuple:
    return ("compiled", "python") if _kernel_ext is not None else ("python",)


def default_backend() -> str:
    forced = os.environ.get("UPWINDFILTER_BACKEND", "").strip().lower()
    if forced in ("python", "numpy"):
        return "python"
    if forced == "compiled" and _kernel_ext is None:
        raise RuntimeError("UPWINDFILTER_BACKEND=compiled but the extension is not built")
    return "compiled" if _kernel_ext is not None else "python"


def default_threads() -> int:
    env = os.environ.get("UPWINDFILTER_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"UPWINDFILTER_THREADS must be an integer, got {env!r}") from None
        return max(1, n)
    return max(1, min(4, os.cpu_count() or 1))


def _executor(n: int) -> ThreadPoolExecutor:
    global _pool, _pool_size
    if _pool is None or _pool_size < n:
        if _pool is not None:
            _pool.shutdown(wait=True)
        _pool = ThreadPoolExecutor(max_workers=n, thread_name_prefix="upwindfilter")
        _pool_size = n
    return _pool


def _as_row(packed):
    """The stencil with the axes swapped, for 1D data laid out as a single row."""
    t = getattr(packed, "_row_form", None)
    if t is None:
        t = replace(packed, pox=packed.poy, poy=packed.pox, mox=packed.moy, moy=packed.mox,
                    pw=np.ascontiguousarray(packed.pw[:, [0, 2, 1, 3]]),
                    mw=np.ascontiguousarray(packed.mw[:, [0, 2, 1, 3]]))
        object.__setattr__(packed, "_row_form", t)
    return t


def _compiled(packed, gp, gm, threads):
    D, nx, ny = gp.shape
    if ny == 1 and nx > 1:
        # column data: one long row keeps the compiled inner loop contiguous
        out = _compiled(_as_row(packed), gp.reshape(D, 1, nx), gm.reshape(D, 1, nx), 1)
        return out.reshape(nx, 1)
    out = np.empty((nx, ny))
    args = (gp, gm, packed.omega, packed.node_start, packed.coef,
            packed.pox, packed.poy, packed.pw, packed.mox, packed.moy, packed.mw,
            packed.aligned, out)
    n = max(1, min(threads, (nx * ny) // _MIN_CELLS_PER_THREAD, nx))
    if n == 1:
        _kernel_ext.stencil_rows(*args, 0, nx)
        return out
    bounds = np.linspace(0, nx, n + 1).astype(int)
    futs = [_executor(n).submit(_kernel_ext.stencil_rows, *args, int(a), int(b))
            for a, b in zip(bounds[:-1], bounds[1:])]
    for f in futs:
        f.result()
    return out


def stencil_sum(packed, gp, gm, backend: str | None = None, threads: int | None = None):
    """Evaluate the packed stencil on flux fields of shape ``(D, nx, ny)``."""
    backend = backend or default_backend()
    gp = np.ascontiguousarray(gp, dtype=float)
    gm = np.ascontiguousarray(gm, dtype=float)
    if backend == "python":
        return _kernel_py.stencil_sum(packed, gp, gm)
    if backend != "compiled":
        raise ValueError(f"unknown backend {backend!r}")
    if _kernel_ext is None:
        raise RuntimeError("compiled backend requested but the extension is not built")
    return _compiled(packed, gp, gm, threads or default_threads())
