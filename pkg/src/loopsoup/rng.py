"""Counter-based random streams.

Every random draw in the library comes from a Philox generator whose key is
derived from ``(seed, purpose, index)``. Streams never share state, so loops
(or whole soups) can be generated in any order, or concurrently, and still
reproduce bit for bit.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# purpose tags, high bits of the second key word
SOUP_COUNT = 1
SOUP_LOOP = 2
LATTICE = 3
DRIVING = 4
CURVE = 5
SUBSOUP = 6
MISC = 7


def stream(seed: int, purpose: int, index: int = 0) -> np.random.Generator:
    """Return an independent generator for ``(seed, purpose, index)``."""
    if index < 0 or index >= 1 << 48:
        raise ValueError(f"stream index out of range: {index}")
    word = ((purpose & 0xFFFF) << 48) | index
    key = (int(seed) & _MASK64) | (word << 64)
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(seed: int, purpose: int, index: int = 0) -> int:
    """A 63-bit child seed, for APIs that take a plain integer."""
    return int(stream(seed, purpose, index).integers(0, 1 << 63))
