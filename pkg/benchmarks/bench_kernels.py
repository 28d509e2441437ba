"""Time the numba kernels against their numpy / pure-Python twins.

    python benchmarks/bench_kernels.py [--repeat 5] [--n 200000]

Both paths are called directly (the PRUNEFUSE_NUMBA flag only picks the
default dispatch), and every pair is checked for bit-identical output before
timings are reported.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from prunefuse import _kernels as K
from prunefuse.rng import Xoshiro256


def _best(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_uniform(n: int, repeat: int):
    seed = Xoshiro256(7).state
    out_nb, out_py = np.empty(n), np.empty(n)
    K.fill_uniform_nb(seed.copy(), out_nb[:8])  # compile
    t_nb = _best(lambda: K.fill_uniform_nb(seed.copy(), out_nb), repeat)
    t_py = _best(lambda: K.fill_uniform_py(seed.copy(), out_py), max(1, repeat // 2))
    assert np.array_equal(out_nb, out_py)
    return t_nb, t_py


def bench_shuffle(n: int, repeat: int):
    seed = Xoshiro256(11).state
    a_nb, a_py = np.arange(n, dtype=np.int64), np.arange(n, dtype=np.int64)

    def run_nb():
        a_nb[:] = np.arange(n)
        K.partial_shuffle_nb(seed.copy(), a_nb, n)

    def run_py():
        a_py[:] = np.arange(n)
        K.partial_shuffle_py(seed.copy(), a_py, n)

    K.partial_shuffle_nb(seed.copy(), np.arange(4, dtype=np.int64), 4)
    t_nb = _best(run_nb, repeat)
    t_py = _best(run_py, max(1, repeat // 2))
    assert np.array_equal(a_nb, a_py)
    return t_nb, t_py


def _kcenters(points, k, update):
    n = points.shape[0]
    mind = np.full(n, np.inf)
    taken = np.zeros(n, dtype=np.bool_)
    taken[0] = True
    order = [0]
    nxt = 0
    for _ in range(k - 1):
        nxt = update(points, points[nxt], mind, taken)
        taken[nxt] = True
        order.append(int(nxt))
    return order


def bench_kcenters(n: int, k: int, dim: int, repeat: int):
    pts = np.random.default_rng(0).standard_normal((n, dim))
    _kcenters(pts[:16], 4, K.update_and_argmax_nb)
    res = {}
    t_nb = _best(lambda: res.__setitem__("nb", _kcenters(pts, k, K.update_and_argmax_nb)), repeat)
    t_np = _best(lambda: res.__setitem__("np", _kcenters(pts, k, K.update_and_argmax_np)), repeat)
    assert res["nb"] == res["np"]
    return t_nb, t_np


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200_000)
    ap.add_argument("--pool", type=int, default=5000)
    ap.add_argument("--k", type=int, default=250)
    ap.add_argument("--dim", type=int, default=32)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not K.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    rows = [
        (f"xoshiro fill_uniform n={args.n}", *bench_uniform(args.n, args.repeat)),
        (f"Fisher-Yates shuffle n={args.n}", *bench_shuffle(args.n, args.repeat)),
        (f"greedy k-centers n={args.pool} k={args.k} d={args.dim}",
         *bench_kcenters(args.pool, args.k, args.dim, args.repeat)),
    ]
    print(f"{'kernel':<44} {'numba ms':>10} {'fallback ms':>12} {'speedup':>8}")
    for name, t_nb, t_fb in rows:
        print(f"{name:<44} {1e3 * t_nb:>10.2f} {1e3 * t_fb:>12.2f} {t_fb / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
