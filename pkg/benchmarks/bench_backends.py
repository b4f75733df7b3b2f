#!/usr/bin/env python3
"""Benchmark the numpy (BLAS) and numba implementations of the hot kernels.

Times the batched chaos quadratic form and the Haar cell-sum accumulation on
a pool of the size the benchmark studies produce (about 2n points).  Run:

    python benchmarks/bench_backends.py [--n 100] [--b 10000] [--repeat 5]

The reported numbers justify the default backend choice: with a decent BLAS
the matmul formulation of ``chaos_batch`` wins by roughly an order of
magnitude; the numba loops are the portable fallback
(POISSON_TWOSAMPLE_BACKEND=numba).
"""

import argparse
import time

import numpy as np

from poisson_twosample.backends import IMPLEMENTATIONS
from poisson_twosample.kernels import ApproxKernel, gram


def time_call(fn, *args, repeat: int) -> float:
    fn(*args)  # warm up (JIT compile / BLAS thread spin-up)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=float, default=100.0, help="intensity scale (pool ~ 2n points)")
    parser.add_argument("--b", type=int, default=10_000, help="replicates per batch")
    parser.add_argument("--repeat", type=int, default=5, help="timing repetitions")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    npts = rng.poisson(2 * args.n)
    points = rng.random(npts)
    signs = (rng.integers(0, 2, size=(args.b, npts)) * 2 - 1).astype(np.int8)
    gram_matrix = gram(ApproxKernel("gaussian", 0.25), points)
    ncells = 128
    cells = np.minimum((points * ncells).astype(np.int64), ncells - 1)

    print(f"pool size {npts}, {args.b} replicates, best of {args.repeat}")
    print(f"{'kernel':<16} {'backend':<8} {'seconds':>10}")
    rows = []
    for backend, impls in IMPLEMENTATIONS.items():
        t = time_call(impls["chaos_batch"], gram_matrix, signs, repeat=args.repeat)
        rows.append(("chaos_batch", backend, t))
        t = time_call(impls["cell_sum_batch"], cells, ncells, signs, repeat=args.repeat)
        rows.append(("cell_sum_batch", backend, t))
    for kernel_name, backend, t in sorted(rows):
        print(f"{kernel_name:<16} {backend:<8} {t:>10.4f}")

    for kernel_name in ("chaos_batch", "cell_sum_batch"):
        times = {b: t for k, b, t in rows if k == kernel_name}
        if len(times) == 2:
            ratio = times["numba"] / times["numpy"]
            faster = "numpy" if ratio > 1 else "numba"
            print(f"{kernel_name}: {faster} faster by {max(ratio, 1 / ratio):.1f}x")


if __name__ == "__main__":
    main()
