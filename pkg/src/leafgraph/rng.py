"""Deterministic counter-based pseudo-random generator.

The generator is a splitmix64 stream: output ``i`` is ``mix64(seed + (i+1) *
GOLDEN)`` where ``mix64`` is the standard splitmix finalizer.  Because each
output depends only on (seed, counter) the stream is seekable, and independent
sub-streams are derived by hashing a text label into the seed.  Streams are
bit-reproducible for a fixed seed within this implementation; no cross-language
reproducibility is promised.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK = 0xFFFFFFFFFFFFFFFF

_U64 = np.uint64
_INV_2_53 = 1.0 / float(1 << 53)


def _mix64_int(z: int) -> int:
    """Scalar splitmix64 finalizer in plain Python ints (no overflow warns)."""
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _U64(30))) * _U64(_MIX1)
        z = (z ^ (z >> _U64(27))) * _U64(_MIX2)
        return z ^ (z >> _U64(31))


def _fnv1a(label: str) -> int:
    h = _FNV_OFFSET
    for b in label.encode("utf-8"):
        h = ((h ^ b) * _FNV_PRIME) & _MASK
    return h


class Rng:
    """Seekable splitmix64 stream with derivable sub-streams."""

    algorithm = "splitmix64"

    def __init__(self, seed: int, _counter: int = 0):
        self.seed = seed & _MASK
        self._counter = _counter

    def stream(self, label: str) -> "Rng":
        """Independent child stream for (seed, label)."""
        return Rng(_mix64_int(((self.seed ^ _fnv1a(label)) + _GOLDEN) & _MASK))

    def bulk_u64(self, n: int) -> np.ndarray:
        """Next ``n`` raw 64-bit outputs, advancing the counter."""
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            return _mix64_array(_U64(self.seed) + idx * _U64(_GOLDEN))

    def next_u64(self) -> int:
        return int(self.bulk_u64(1)[0])

    def uniform(self, n: int | None = None):
        """Doubles in [0, 1) built from the top 53 bits."""
        m = 1 if n is None else n
        vals = (self.bulk_u64(m) >> _U64(11)).astype(np.float64) * _INV_2_53
        return float(vals[0]) if n is None else vals

    def uniform_range(self, lo: float, hi: float, n: int | None = None):
        u = self.uniform(n)
        return lo + (hi - lo) * u

    def normal(self, n: int | None = None):
        """Standard normals via Box-Muller on consecutive uniform pairs."""
        m = 1 if n is None else n
        pairs = (m + 1) // 2
        raw = self.bulk_u64(2 * pairs)
        u1 = ((raw[0::2] >> _U64(11)).astype(np.float64) + 1.0) * _INV_2_53
        u2 = (raw[1::2] >> _U64(11)).astype(np.float64) * _INV_2_53
        r = np.sqrt(-2.0 * np.log(u1))
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(2.0 * np.pi * u2)
        out[1::2] = r * np.sin(2.0 * np.pi * u2)
        out = out[:m]
        return float(out[0]) if n is None else out

    def below(self, n: int) -> int:
        """Integer in [0, n) from one draw; floor(u * n)."""
        return min(int(self.uniform() * n), n - 1)

    def shuffle(self, arr: np.ndarray) -> None:
        """In-place Fisher-Yates (all draws pulled in one bulk call)."""
        n = len(arr)
        if n < 2:
            return
        draws = self.uniform(n - 1)
        for pos, i in enumerate(range(n - 1, 0, -1)):
            j = min(int(draws[pos] * (i + 1)), i)
            arr[i], arr[j] = arr[j], arr[i]

    def permutation(self, n: int) -> np.ndarray:
        out = np.arange(n)
        self.shuffle(out)
        return out

    def choice_without_replacement(self, arr: np.ndarray, k: int) -> np.ndarray:
        """Uniform k-subset via partial Fisher-Yates; k >= len gives a copy."""
        pool = np.array(arr, copy=True)
        n = len(pool)
        if k >= n:
            return pool
        draws = self.uniform(k)
        for i in range(k):
            j = i + min(int(draws[i] * (n - i)), n - i - 1)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]
