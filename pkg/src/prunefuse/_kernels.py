"""Hot inner loops, each with a numba kernel and a numpy/pure-Python twin.

Set ``PRUNEFUSE_NUMBA=0`` in the environment to route every call through the
fallback path. Both paths produce bit-identical results; the test suite and
``benchmarks/bench_kernels.py`` exercise them side by side.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


USE_NUMBA = HAVE_NUMBA and os.environ.get("PRUNEFUSE_NUMBA", "1").strip().lower() not in (
    "0",
    "false",
    "no",
    "off",
)

MASK64 = 0xFFFFFFFFFFFFFFFF
_INV_2_53 = 1.0 / 9007199254740992.0


# ---------------------------------------------------------------------------
# xoshiro256** core
# ---------------------------------------------------------------------------


@njit(cache=True)
def _rotl_nb(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit(cache=True)
def _next_nb(s):
    s0 = s[0]
    s1 = s[1]
    s2 = s[2]
    s3 = s[3]
    result = _rotl_nb(s1 * np.uint64(5), 7) * np.uint64(9)
    t = s1 << np.uint64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl_nb(s3, 45)
    s[0] = s0
    s[1] = s1
    s[2] = s2
    s[3] = s3
    return result


@njit(cache=True)
def _uniform_nb(s):
    return np.float64(_next_nb(s) >> np.uint64(11)) * _INV_2_53


@njit(cache=True)
def fill_uniform_nb(s, out):
    for i in range(out.shape[0]):
        out[i] = _uniform_nb(s)


@njit(cache=True)
def partial_shuffle_nb(s, arr, k):
    n = arr.shape[0]
    for i in range(k):
        j = i + np.int64(_uniform_nb(s) * (n - i))
        tmp = arr[i]
        arr[i] = arr[j]
        arr[j] = tmp


def _rotl_py(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


def _next_py(s: list) -> int:
    s0, s1, s2, s3 = s
    result = (_rotl_py((s1 * 5) & MASK64, 7) * 9) & MASK64
    t = (s1 << 17) & MASK64
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl_py(s3, 45)
    s[0], s[1], s[2], s[3] = s0, s1, s2, s3
    return result


def fill_uniform_py(state: np.ndarray, out: np.ndarray) -> None:
    s = [int(v) for v in state]
    for i in range(out.shape[0]):
        out[i] = (_next_py(s) >> 11) * _INV_2_53
    state[:] = np.array(s, dtype=np.uint64)


def partial_shuffle_py(state: np.ndarray, arr: np.ndarray, k: int) -> None:
    s = [int(v) for v in state]
    n = arr.shape[0]
    for i in range(k):
        u = (_next_py(s) >> 11) * _INV_2_53
        j = i + int(u * (n - i))
        arr[i], arr[j] = arr[j], arr[i]
    state[:] = np.array(s, dtype=np.uint64)


# ---------------------------------------------------------------------------
# k-centers distance passes (squared Euclidean, dimension-sequential sums)
# ---------------------------------------------------------------------------


@njit(cache=True)
def min_sqdist_to_set_nb(points, centers, out):
    """out[i] = min(out[i], min_c ||points[i] - centers[c]||^2)."""
    n, d = points.shape
    for c in range(centers.shape[0]):
        for i in range(n):
            acc = 0.0
            for k in range(d):
                diff = points[i, k] - centers[c, k]
                acc += diff * diff
            if acc < out[i]:
                out[i] = acc


@njit(cache=True)
def update_and_argmax_nb(points, center, mind, taken):
    """Fold one new center into ``mind``; return the farthest untaken index."""
    n, d = points.shape
    best = -1
    best_val = -1.0
    for i in range(n):
        acc = 0.0
        for k in range(d):
            diff = points[i, k] - center[k]
            acc += diff * diff
        if acc < mind[i]:
            mind[i] = acc
        if not taken[i] and mind[i] > best_val:
            best_val = mind[i]
            best = i
    return best


def _sqdist_to_point_np(points: np.ndarray, center: np.ndarray) -> np.ndarray:
    acc = np.zeros(points.shape[0], dtype=np.float64)
    for k in range(points.shape[1]):
        diff = points[:, k] - center[k]
        acc += diff * diff
    return acc


def min_sqdist_to_set_np(points: np.ndarray, centers: np.ndarray, out: np.ndarray) -> None:
    for c in range(centers.shape[0]):
        np.minimum(out, _sqdist_to_point_np(points, centers[c]), out=out)


def update_and_argmax_np(
    points: np.ndarray, center: np.ndarray, mind: np.ndarray, taken: np.ndarray
) -> int:
    np.minimum(mind, _sqdist_to_point_np(points, center), out=mind)
    masked = np.where(taken, -1.0, mind)
    best = int(np.argmax(masked))
    return best if masked[best] >= 0.0 else -1


if USE_NUMBA:
    fill_uniform = fill_uniform_nb
    partial_shuffle = partial_shuffle_nb
    min_sqdist_to_set = min_sqdist_to_set_nb
    update_and_argmax = update_and_argmax_nb
else:
    fill_uniform = fill_uniform_py
    partial_shuffle = partial_shuffle_py
    min_sqdist_to_set = min_sqdist_to_set_np
    update_and_argmax = update_and_argmax_np
