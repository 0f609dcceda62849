"""Counter-based random streams for reproducible bootstrap replicates.

Each replicate ``b`` of a run seeded with ``seed`` owns an independent
Philox4x64-10 stream with key ``(seed, b)``.  Block ``j`` of the stream is the
Philox bijection applied to the counter ``(j, 0, 0, 0)``; its four 64-bit words
are consumed in order.  Because the stream is a pure function of
``(seed, b, j)``, replicates can be generated in any order, on any number of
threads, and still reproduce bit for bit.

Bounded integers in ``[0, n)`` use the multiply-high map ``(u * n) >> 64``
on a raw word ``u``.  The map has a bias below ``n / 2**64`` and never
rejects, so the number of words consumed per draw is always exactly one.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError

_MASK64 = (1 << 64) - 1
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)


def _check_u64(value: int, name: str) -> int:
    value = int(value)
    if not 0 <= value <= _MASK64:
        raise InvalidArgumentError(f"{name} must be a 64-bit unsigned integer, got {value}")
    return value


class ReplicateStream:
    """Random stream for one bootstrap replicate.

    Parameters
    ----------
    seed : int
        Run seed (64-bit unsigned).
    index : int
        Replicate index ``b`` (64-bit unsigned).
    """

    def __init__(self, seed: int, index: int):
        self.seed = _check_u64(seed, "seed")
        self.index = _check_u64(index, "index")
        # numpy increments the counter before each block, so starting at
        # 2**256 - 1 makes the first block use counter zero.
        self._bitgen = np.random.Philox(
            key=np.array([self.seed, self.index], dtype=np.uint64),
            counter=np.full(4, _MASK64, dtype=np.uint64),
        )

    def raw(self, size: int) -> np.ndarray:
        """Next `size` raw 64-bit words."""
        return np.asarray(self._bitgen.random_raw(size), dtype=np.uint64)

    def integers(self, n: int, size: int) -> np.ndarray:
        """`size` draws uniform on ``{0, ..., n-1}``."""
        if not 1 <= n < 2**32:
            raise InvalidArgumentError(f"bound must be in [1, 2**32), got {n}")
        u = self.raw(size)
        nn = np.uint64(n)
        hi = (u >> _SHIFT32) * nn
        lo = ((u & _MASK32) * nn) >> _SHIFT32
        return ((hi + lo) >> _SHIFT32).astype(np.intp)


def gaussian_generator(seed: int) -> np.random.Generator:
    """Generator for simulation noise, keyed by `seed` on stream index 2**64-1.

    The replicate streams never use that index in practice, so simulation
    noise and bootstrap resampling stay independent under a shared seed.
    """
    seed = _check_u64(seed, "seed")
    return np.random.Generator(
        np.random.Philox(key=np.array([seed, _MASK64], dtype=np.uint64))
    )
