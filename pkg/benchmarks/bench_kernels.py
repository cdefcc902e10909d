"""Compare the numba and numpy variants of the routing kernels.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from prppp import kernels
from prppp._accel import HAVE_NUMBA


def random_cost(rng, n):
    pts = rng.uniform(0, 100, size=(n, 2))
    return np.linalg.norm(pts[:, None] - pts[None], axis=-1)


def best_of(fn, repeat):
    fn()  # warm-up, includes JIT compilation
    number = max(1, int(0.2 / max(timeit.timeit(fn, number=1), 1e-6)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba unavailable or disabled (PRPPP_NO_NUMBA); only numpy timings are shown")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<12}{'nodes':>6}{'numpy ms':>12}{'numba ms':>12}{'speedup':>9}")
    for n in (6, 9, 12, 13):
        cost = random_cost(rng, n)
        t_np = best_of(lambda: kernels._held_karp_numpy(cost), args.repeat)
        t_jit = best_of(lambda: kernels._held_karp_jit(cost), args.repeat) if HAVE_NUMBA else float("nan")
        print(f"{'held-karp':<12}{n:>6}{t_np * 1e3:>12.3f}{t_jit * 1e3:>12.3f}{t_np / t_jit:>9.1f}")
    for n in (20, 50, 100, 200):
        cost = random_cost(rng, n)
        tour = np.concatenate([[0], rng.permutation(np.arange(1, n)), [0]]).astype(np.int64)
        t_np = best_of(lambda: kernels._two_opt_numpy(tour.copy(), cost), args.repeat)
        t_jit = best_of(lambda: kernels._two_opt_jit(tour.copy(), cost), args.repeat) if HAVE_NUMBA else float("nan")
        print(f"{'2-opt':<12}{n:>6}{t_np * 1e3:>12.3f}{t_jit * 1e3:>12.3f}{t_np / t_jit:>9.1f}")


if __name__ == "__main__":
    main()
