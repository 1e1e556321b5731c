"""Time the compiled EM kernel against the pure-numpy twin.

Usage: python benchmarks/bench_em.py [--iters N] [--truncation N] [--grid-k K]
"""

import argparse
import time

import numpy as np

from clicktomo import (
    StoppingConfig,
    build_matrix,
    forward_click_probabilities,
    frequencies,
    heralded_split_state,
    sample_clicks,
    uniform_grid,
)
from clicktomo._backend import NUMBA_AVAILABLE
from clicktomo._kernels import em_run_numba, em_run_numpy


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--iters", type=int, default=20_000)
    parser.add_argument("--truncation", type=int, default=3)
    parser.add_argument("--grid-k", type=int, default=34, dest="grid_k")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    grid = uniform_grid(args.grid_k, 0.015, 0.325)
    state = heralded_split_state(0.4, args.truncation)
    probs = forward_click_probabilities(state, grid)
    record = sample_clicks(probs, 100_000, seed=0)
    matrix = build_matrix(grid, 2, args.truncation)
    h = frequencies(record)
    inv_colsum = 1.0 / matrix.column_sums()
    matrix_t = np.ascontiguousarray(matrix.rows.T)
    n_cols = matrix.rows.shape[1]
    q0 = np.full(n_cols, 1.0 / n_cols)
    opts = StoppingConfig(max_iters=args.iters, patience=args.iters)
    call_args = (
        matrix.rows, matrix_t, inv_colsum, h, q0,
        opts.max_iters, opts.patience, 0.0, 0.0,
    )

    kernels = [("numpy", em_run_numpy)]
    if NUMBA_AVAILABLE:
        em_run_numba(*call_args[:5], 10, 10, 0.0, 0.0)  # warm the JIT
        kernels.append(("numba", em_run_numba))
    else:
        print("numba unavailable; timing the numpy kernel only")

    print(
        f"EM kernel, {args.iters} iterations, K={args.grid_k}, "
        f"{n_cols} distribution entries"
    )
    times = {}
    for name, fn in kernels:
        best = min(
            _timed(fn, call_args) for _ in range(args.repeats)
        )
        times[name] = best
        rate = args.iters / best
        print(f"  {name:6s}: {best:8.3f} s  ({rate:,.0f} iterations/s)")
    if len(times) == 2:
        print(f"  speedup: {times['numpy'] / times['numba']:.2f}x")


def _timed(fn, call_args):
    start = time.perf_counter()
    fn(*call_args)
    return time.perf_counter() - start


if __name__ == "__main__":
    main()
