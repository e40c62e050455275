"""Portable seedable random streams.

SplitMix64 is used in its counter form: the n-th output of a stream with
state ``s`` is ``mix(s + (n + 1) * GAMMA)`` modulo 2**64, so any block of
draws is one vectorized numpy expression and the bit stream is identical
to any other SplitMix64 implementation seeded with the same integer.
"""

from __future__ import annotations

from typing import Sequence, TypeVar

import numpy as np
import numpy.typing as npt

GAMMA = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)

_MASK = (1 << 64) - 1
_T = TypeVar("_T")


def _mix(z: npt.NDArray[np.uint64]) -> npt.NDArray[np.uint64]:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * MIX1
        z = (z ^ (z >> np.uint64(27))) * MIX2
        return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Counter-based SplitMix64 stream.

    Parameters
    ----------
    seed:
        Any Python integer; reduced modulo 2**64.
    """

    def __init__(self, seed: int) -> None:
        self.seed = int(seed) & _MASK
        self._state = np.uint64(self.seed)
        self._counter = 0

    def next_u64(self, size: int | None = None) -> npt.NDArray[np.uint64] | int:
        """Draw raw 64-bit outputs; a scalar int when ``size`` is None."""
        count = 1 if size is None else int(size)
        steps = np.arange(self._counter + 1, self._counter + count + 1, dtype=np.uint64)
        self._counter += count
        with np.errstate(over="ignore"):
            out = _mix(self._state + steps * GAMMA)
        if size is None:
            return int(out[0])
        return out

    def uniform(self, size: int | None = None) -> npt.NDArray[np.float64] | float:
        """Uniform doubles in [0, 1) from the top 53 bits."""
        raw = np.atleast_1d(self.next_u64(1 if size is None else size))
        out = (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return float(out[0]) if size is None else out

    def integers(self, low: int, high: int, size: int | None = None) -> npt.NDArray[np.int64] | int:
        """Integers in [low, high)."""
        if high <= low:
            raise ValueError(f"empty integer range [{low}, {high})")
        u = np.atleast_1d(self.uniform(1 if size is None else size))
        out = low + np.floor(u * (high - low)).astype(np.int64)
        return int(out[0]) if size is None else out

    def normal(self, size: int) -> npt.NDArray[np.float64]:
        """Standard normal draws by Box-Muller."""
        half = (size + 1) // 2
        u1 = 1.0 - np.asarray(self.uniform(half))
        u2 = np.asarray(self.uniform(half))
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
        return z[:size]

    def complex_normal(self, size: int) -> npt.NDArray[np.complex128]:
        return (self.normal(size) + 1j * self.normal(size)) / np.sqrt(2.0)

    def permutation(self, n: int) -> npt.NDArray[np.int64]:
        """Fisher-Yates permutation of range(n)."""
        perm = np.arange(n, dtype=np.int64)
        if n < 2:
            return perm
        u = np.asarray(self.uniform(n - 1))
        for pos, i in enumerate(range(n - 1, 0, -1)):
            j = int(u[pos] * (i + 1))
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def choice(self, items: Sequence[_T], k: int) -> list[_T]:
        """``k`` distinct items in random order."""
        k = min(k, len(items))
        return [items[int(i)] for i in self.permutation(len(items))[:k]]

    def spawn(self, key: int) -> SplitMix64:
        """Independent child stream identified by ``key``."""
        with np.errstate(over="ignore"):
            child = _mix(np.array([self._state ^ (np.uint64(key & _MASK) * GAMMA)], dtype=np.uint64))
        return SplitMix64(int(child[0]))
