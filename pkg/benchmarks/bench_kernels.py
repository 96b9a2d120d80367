"""Compiled kernels versus the pure-Python fallback.

Run with ``python benchmarks/bench_kernels.py``. Prints one line per case
with the best-of-N wall time of each backend and the speedup.
"""
import argparse
import timeit

import numpy as np

from pdcontract import _kernels_py

try:
    from pdcontract import _kernels
except ImportError:
    _kernels = None


def _spd(n, rng):
    M = rng.standard_normal((n, n))
    return M @ M.T + n * np.eye(n)


def eigh_cases(rng):
    for n in (2, 4, 8, 16, 32):
        S = _spd(n, rng)
        yield f"jacobi_eigh n={n}", (lambda mod, S=S: mod.jacobi_eigh(S))


def rk4_cases(rng):
    for d, steps in ((2, 10_000), (3, 100_000), (8, 20_000)):
        A = -_spd(d, rng) / d + (lambda K: K - K.T)(rng.standard_normal((d, d)))
        h = np.full(steps, 1e-3)
        b_nodes = rng.standard_normal((steps + 1, d))
        b_mid = rng.standard_normal((steps, d))
        z0 = rng.standard_normal(d)
        yield (
            f"rk4_affine d={d} steps={steps}",
            (lambda mod, A=A, bn=b_nodes, bm=b_mid, z0=z0, h=h: mod.rk4_affine(A, bn, bm, z0, h)),
        )


def best_time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    if _kernels is None:
        print("compiled extension not built; timing the fallback only")
    print(f"{'case':32s} {'compiled [ms]':>14s} {'fallback [ms]':>14s} {'speedup':>8s}")
    for name, fn in [*eigh_cases(rng), *rk4_cases(rng)]:
        slow = best_time(lambda: fn(_kernels_py), args.repeat) * 1e3
        if _kernels is None:
            print(f"{name:32s} {'-':>14s} {slow:14.3f} {'-':>8s}")
            continue
        fast = best_time(lambda: fn(_kernels), args.repeat) * 1e3
        print(f"{name:32s} {fast:14.3f} {slow:14.3f} {slow / fast:8.1f}x")


if __name__ == "__main__":
    main()
