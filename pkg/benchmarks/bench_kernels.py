"""Compare the compiled and numpy Legendre-sum kernels.

Usage: python benchmarks/bench_kernels.py [n_nodes] [degree]

The Legendre sum dominates assembly of the singular quadrature matrices, so
this is the piece worth compiling.  Both backends are timed on the same
random Gram matrix of node directions and checked against each other.
"""

import sys
import time

import numpy as np

from npsl._kernels import BACKEND
from npsl._kernels.numpy_backend import legendre_sum as numpy_sum

try:
    from npsl._kernels._core import legendre_sum as cython_sum
except ImportError:
    cython_sum = None


def bench(func, cosgamma, degree, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = func(cosgamma, degree)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 1024
    degree = int(sys.argv[2]) if len(sys.argv) > 2 else 32
    rng = np.random.default_rng(0)
    dirs = rng.normal(size=(n, 3))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    cosgamma = np.clip(dirs @ dirs.T, -1.0, 1.0)

    print(f"active backend: {BACKEND}; N = {n}, degree = {degree}")
    t_np, out_np = bench(numpy_sum, cosgamma, degree)
    print(f"numpy : {t_np:8.4f} s")
    if cython_sum is None:
        print("cython: extension not built")
        return
    t_cy, out_cy = bench(cython_sum, cosgamma, degree)
    diff = float(np.max(np.abs(out_np - out_cy)))
    print(f"cython: {t_cy:8.4f} s  (speedup {t_np / t_cy:.2f}x, "
          f"max backend difference {diff:.2e})")


if __name__ == "__main__":
    main()
