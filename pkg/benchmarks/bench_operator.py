"""Compare the compiled and numpy stencil kernels on a few operator setups.

    python3 benchmarks/bench_operator.py [--repeat 5] [--threads 4]

Each row reports the median wall time per ``apply`` call and checks that both
backends return bit-identical arrays.
"""
from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from upwindfilter import Grid, build_plan, builtin_filter, burgers, rescale, standard_measure
from upwindfilter import _kernels
from upwindfilter.flux import BURGERS, FluxSpec
from upwindfilter.operator import apply

CASES = [
    # (label, grid shape, measure, filter, alpha in cells)
    ("1D N=4096 box 8h", (4096,), "line", "box", 8),
    ("1D N=4096 exp 4h", (4096,), "line", "exponential", 4),
    ("2D 128^2 square hat 4h", (128, 128), "square", "hat", 4),
    ("2D 128^2 hexagon box 4h", (128, 128), "hexagon", "box", 4),
    ("2D 256^2 hexagon hat 4h", (256, 256), "hexagon", "hat", 4),
]


def _time(fn, repeat):
    fn()
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--threads", type=int, default=_kernels.default_threads())
    args = ap.parse_args()
    if "compiled" not in _kernels.available_backends():
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")

    rng = np.random.default_rng(0)
    print(f"{'case':28s} {'numpy ms':>10s} {'compiled-1 ms':>14s} {'compiled-' + str(args.threads) + ' ms':>14s}"
          f" {'speedup':>8s}  identical")
    for label, shape, meas, fname, cells in CASES:
        grid = Grid(shape, (1.0,) * len(shape))
        F = (burgers() if len(shape) == 1 else FluxSpec.builtin(BURGERS, [1.0, 0.5], (-1, 1))).negated()
        plan = build_plan(F, rescale(builtin_filter(fname), cells * grid.h), standard_measure(meas), grid)
        u = rng.uniform(-1, 1, shape)
        t_py = _time(lambda: apply(plan, u, backend="python"), args.repeat)
        t_c1 = _time(lambda: apply(plan, u, backend="compiled", threads=1), args.repeat)
        t_cn = _time(lambda: apply(plan, u, backend="compiled", threads=args.threads), args.repeat)
        same = np.array_equal(apply(plan, u, backend="python"),
                              apply(plan, u, backend="compiled", threads=args.threads))
        print(f"{label:28s} {1e3 * t_py:10.2f} {1e3 * t_c1:14.2f} {1e3 * t_cn:14.2f} "
              f"{t_py / t_cn:8.1f}  {same}")


if __name__ == "__main__":
    main()
