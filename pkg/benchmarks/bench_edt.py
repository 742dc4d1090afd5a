"""Compare the compiled EDT kernel against the pure-Python fallback.

Usage: python3 benchmarks/bench_edt.py [--sizes 32,64,96] [--repeats 3]

Both kernels implement the same exact separable lower-envelope transform,
so beyond timing we also assert bit-identical output on every case.
"""

import argparse
import time

import numpy as np

from segguard import _edt_py
from segguard._edt import KERNEL

try:
    from segguard import _edt_kernel
except ImportError:
    _edt_kernel = None


def bench_one(fn, sq, spacing, repeats):
    best = float("inf")
    out = None
    for _ in range(repeats):
        work = sq.copy()
        t0 = time.perf_counter()
        fn(work, *spacing)
        best = min(best, time.perf_counter() - t0)
        out = work
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="32,64,96")
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    sizes = [int(s) for s in args.sizes.split(",")]
    spacing = (0.7, 1.0, 1.4)
    rng = np.random.default_rng(0)

    print(f"active kernel at import: {KERNEL}")
    print(f"{'size':>6} {'python (s)':>12} {'compiled (s)':>14} {'speedup':>9}")
    for n in sizes:
        sites = rng.random((n, n, n)) < 0.01
        sq = np.where(sites, 0.0, np.inf)
        t_py, out_py = bench_one(_edt_py.edt_sq_inplace, sq, spacing, args.repeats)
        if _edt_kernel is None:
            print(f"{n:>6} {t_py:>12.4f} {'n/a':>14} {'n/a':>9}")
            continue
        t_c, out_c = bench_one(_edt_kernel.edt_sq_inplace, sq, spacing, args.repeats)
        assert np.array_equal(out_py, out_c), "kernels disagree"
        print(f"{n:>6} {t_py:>12.4f} {t_c:>14.4f} {t_py / t_c:>8.1f}x")


if __name__ == "__main__":
    main()
