"""Counter-based deterministic randomness.

Every draw is a pure function of ``(seed, *counter)``, so a value can be
recomputed anywhere (inside a mapper, inside a test oracle) without
threading generator state through the pipeline.
"""

from __future__ import annotations

import hashlib

_MASK64 = (1 << 64) - 1


def _digest(seed: int, parts: tuple, size: int) -> int:
    h = hashlib.blake2b(digest_size=size, key=(seed & _MASK64).to_bytes(8, "little"))
    h.update(repr(parts).encode())
    return int.from_bytes(h.digest(), "little")


def draw64(seed: int, *counter) -> int:
    """A 64-bit pseudo-random integer keyed by ``seed`` and ``counter``."""
    return _digest(seed, counter, 8)


def randbelow(seed: int, bound: int, *counter) -> int:
    """Uniform integer in ``[0, bound)``.

    Uses 128 extra bits of entropy beyond ``bound`` so the modulo bias is
    below 2**-128.
    """
    if bound <= 0:
        raise ValueError("bound must be positive")
    nbytes = (bound.bit_length() + 128 + 7) // 8
    return _digest(seed, counter, min(nbytes, 64)) % bound


def uniform(seed: int, *counter) -> float:
    """Float in ``[0, 1)`` with 53 bits of precision."""
    return (draw64(seed, *counter) >> 11) / float(1 << 53)
