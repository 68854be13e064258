"""Deterministic pseudo-random generator for benchmark reproducibility.

The benchmark generators must reproduce bit-identical data from a 64-bit seed
across platforms and languages, so the generator is pinned down completely
rather than borrowed from a host library:

* state: xoshiro256** (Blackman/Vigna), seeded by four consecutive outputs of
  splitmix64 applied to the seed;
* ``uniform``: doubles in [0, 1) as (next_u64 >> 11) * 2^-53, drawn in order;
* ``normal``: Box-Muller pairs; each pair (u1, u2) of consecutive uniforms
  yields sqrt(-2 ln(1-u1)) * (cos, sin)(2 pi u2); for an odd count the last
  sine draw is discarded but the state still advances by whole pairs;
* matrices are filled row-major.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = 0xFFFFFFFFFFFFFFFF


def _splitmix64_next(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


class Xoshiro256StarStar:
    """xoshiro256** stream with splitmix64 seeding."""

    def __init__(self, seed: int):
        s = seed & _MASK
        state = []
        for _ in range(4):
            s, z = _splitmix64_next(s)
            state.append(z)
        self._s = state

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        x = (s1 * 5) & _MASK
        result = (((x << 7) | (x >> 57)) & _MASK) * 9 & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK
        self._s = [s0, s1, s2, s3]
        return result

    def uniform(self, n: int) -> np.ndarray:
        """n doubles uniform on [0, 1)."""
        out = np.empty(n)
        # local bindings keep the hot loop tolerable for paper-scale fills
        s0, s1, s2, s3 = self._s
        for i in range(n):
            x = (s1 * 5) & _MASK
            r = (((x << 7) | (x >> 57)) & _MASK) * 9 & _MASK
            t = (s1 << 17) & _MASK
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & _MASK
            out[i] = (r >> 11) * 1.1102230246251565e-16  # 2**-53
        self._s = [s0, s1, s2, s3]
        return out

    def uniform_symmetric(self, n: int) -> np.ndarray:
        """n doubles uniform on [-1, 1)."""
        return 2.0 * self.uniform(n) - 1.0

    def normal(self, n: int, scale: float = 1.0) -> np.ndarray:
        """n standard normal draws (Box-Muller), optionally scaled."""
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs)
        u1 = u[0::2]
        u2 = u[1::2]
        rad = np.sqrt(-2.0 * np.log1p(-u1))
        ang = 2.0 * math.pi * u2
        z = np.empty(2 * pairs)
        z[0::2] = rad * np.cos(ang)
        z[1::2] = rad * np.sin(ang)
        return scale * z[:n]
