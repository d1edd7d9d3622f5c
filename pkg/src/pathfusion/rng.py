"""Deterministic random numbers on a fixed algorithm.

All randomness in the package flows through :class:`Rng`, a xoshiro256**
generator seeded via splitmix64. The algorithm is pinned (rather than
deferring to numpy's default generator) so that seeds reproduce the same
draws on every platform and across library upgrades. Bulk draws are filled
by the kernel backend; scalar draws run in plain Python on the same stream,
so the sequence is identical under either backend.
"""

import hashlib

import numpy as np

from . import _kernels

_MASK64 = 0xFFFFFFFFFFFFFFFF
_INV_2_53 = 1.0 / (1 << 53)


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns (new_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def derive_seed(seed: int, *parts) -> int:
    """Mix a base seed with context parts (ints or strings) into a child seed.

    Used to give each fold/epoch/step/purpose its own reproducible stream.
    """
    h = seed & _MASK64
    for p in parts:
        if isinstance(p, str):
            p = int.from_bytes(hashlib.sha256(p.encode("utf-8")).digest()[:8], "little")
        _, out = splitmix64(h ^ (int(p) & _MASK64))
        h = out
    return h


class Rng:
    """xoshiro256** stream with numpy-friendly bulk draws."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        state = self.seed
        words = []
        for _ in range(4):
            state, out = splitmix64(state)
            words.append(out)
        self._state = np.array(words, dtype=np.uint64)

    def child(self, *parts) -> "Rng":
        return Rng(derive_seed(self.seed, *parts))

    # -- raw draws ----------------------------------------------------------

    def next_u64(self) -> int:
        out = np.empty(1, dtype=np.uint64)
        _kernels.xoshiro_fill(self._state, out)
        return int(out[0])

    def raw(self, n: int) -> np.ndarray:
        out = np.empty(int(n), dtype=np.uint64)
        if n:
            _kernels.xoshiro_fill(self._state, out)
        return out

    # -- floats -------------------------------------------------------------

    def uniform(self, n: int) -> np.ndarray:
        """n doubles uniform in [0, 1), 53-bit mantissa resolution."""
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) * _INV_2_53

    def normal(self, n: int) -> np.ndarray:
        """n standard normals via Box-Muller (pairs drawn, tail dropped)."""
        m = (int(n) + 1) // 2
        u = (self.raw(2 * m) >> np.uint64(11)).astype(np.float64)
        u1 = (u[:m] + 1.0) * _INV_2_53  # in (0, 1], keeps log finite
        u2 = u[m:] * _INV_2_53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
        return z[: int(n)]

    def uniform_matrix(self, rows: int, cols: int, low: float, high: float) -> np.ndarray:
        return (low + (high - low) * self.uniform(rows * cols)).reshape(rows, cols)

    def normal_matrix(self, rows: int, cols: int) -> np.ndarray:
        return self.normal(rows * cols).reshape(rows, cols)

    # -- integers and permutations ------------------------------------------

    def below(self, n: int) -> int:
        """Unbiased integer in [0, n) via rejection sampling."""
        if n <= 0:
            raise ValueError("below() requires n >= 1")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample_indices(self, n: int, k: int) -> np.ndarray:
        """k distinct indices from range(n), uniform, returned sorted."""
        if k >= n:
            return np.arange(n, dtype=np.int64)
        pool = list(range(n))
        for i in range(k):
            j = i + self.below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        picked = np.array(pool[:k], dtype=np.int64)
        picked.sort()
        return picked
