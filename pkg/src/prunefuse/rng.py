"""Portable seeded randomness.

Every random draw in the package comes from a xoshiro256** generator seeded
through splitmix64, so a seed reproduces the same stream in any language that
implements those two published algorithms. Named sub-streams are derived from
a master seed with :func:`derive_seed`; consumers of one stream never perturb
another.

Conventions (fixed, part of the reproducibility contract):

* uniform double = ``(next() >> 11) * 2**-53``, in [0, 1)
* bounded index in [0, m) = ``floor(uniform * m)``
* shuffles are forward Fisher-Yates: step i swaps a[i] with a[i + floor(u*(n-i))]
* normals use Box-Muller on two uniforms (cosine branch only)
"""

from __future__ import annotations

import numpy as np

from . import _kernels

MASK64 = _kernels.MASK64
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> tuple[int, int]:
    """One splitmix64 step. Returns (new_state, output)."""
    x = (x + _GOLDEN) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return x, z ^ (z >> 31)


def _fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & MASK64
    return h


def derive_seed(master: int, *keys: int | str) -> int:
    """Derive a 64-bit sub-stream seed from a master seed and a key path.

    Strings are hashed with FNV-1a 64 over UTF-8; integers are taken modulo
    2**64. Each key is folded in with a splitmix64 mix.
    """
    _, h = splitmix64(master & MASK64)
    for key in keys:
        if isinstance(key, str):
            k = _fnv1a64(key.encode("utf-8"))
        else:
            k = int(key) & MASK64
        _, k = splitmix64(k)
        _, h = splitmix64(h ^ k)
    return h


class Xoshiro256:
    """xoshiro256** generator with a small numpy-facing API."""

    def __init__(self, seed: int):
        x = seed & MASK64
        words = []
        for _ in range(4):
            x, out = splitmix64(x)
            words.append(out)
        if not any(words):  # all-zero state is a fixed point
            words[0] = 1
        self.state = np.array(words, dtype=np.uint64)

    @classmethod
    def from_keys(cls, master: int, *keys: int | str) -> "Xoshiro256":
        return cls(derive_seed(master, *keys))

    def random(self, n: int) -> np.ndarray:
        out = np.empty(int(n), dtype=np.float64)
        if n:
            _kernels.fill_uniform(self.state, out)
        return out

    def uniform(self, low: float, high: float, n: int) -> np.ndarray:
        return low + (high - low) * self.random(n)

    def normal(self, n: int) -> np.ndarray:
        u = self.random(2 * int(n))
        u1 = 1.0 - u[0::2]  # (0, 1]
        u2 = u[1::2]
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def sample(self, n: int, k: int) -> np.ndarray:
        """k distinct indices from range(n) via partial Fisher-Yates."""
        arr = np.arange(int(n), dtype=np.int64)
        if k:
            _kernels.partial_shuffle(self.state, arr, int(k))
        return arr[: int(k)].copy()

    def permutation(self, n: int) -> np.ndarray:
        return self.sample(n, n)
