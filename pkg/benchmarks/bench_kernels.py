"""Benchmark the compiled packed-bit kernel against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--sizes 500,1000,2000] [--t 522]
Both backends must produce identical counts; the script asserts it.
"""

import argparse
import time

import numpy as np

from finatoms import _kernel_py, kernels


def bench_once(fn, *args, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, result


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="500,1000,2000,5000")
    parser.add_argument("--t", type=int, default=522)
    parser.add_argument("--threads", type=int, default=None)
    args = parser.parse_args()

    threads = args.threads or kernels.default_threads()
    rng = np.random.default_rng(0)
    print(f"T={args.t}, threads={threads}, extension built: {kernels.HAVE_EXTENSION}")
    print(f"{'N':>6}  {'numpy (s)':>10}  {'packed (s)':>10}  {'speedup':>8}")

    for n in (int(s) for s in args.sizes.split(",")):
        signs = rng.integers(-1, 2, size=(n, args.t)).astype(np.int8)
        t_py, (counts_py, co_py) = bench_once(
            _kernel_py.comovement_counts, signs, threads
        )
        if not kernels.HAVE_EXTENSION:
            print(f"{n:>6}  {t_py:>10.3f}  {'-':>10}  {'-':>8}")
            continue

        def run_cy():
            plus, minus = kernels.pack_signs(signs)
            counts = np.zeros((n, n), dtype=np.uint32)
            co = np.zeros((n, n), dtype=np.uint32)
            kernels._kernel_cy.comovement_packed(plus, minus, counts, co, threads)
            return counts, co

        t_cy, (counts_cy, co_cy) = bench_once(run_cy)
        assert np.array_equal(counts_py, counts_cy), "backend count mismatch"
        assert np.array_equal(co_py, co_cy), "backend co_assigned mismatch"
        print(f"{n:>6}  {t_py:>10.3f}  {t_cy:>10.3f}  {t_py / t_cy:>7.1f}x")


if __name__ == "__main__":
    main()
