"""Counter-based seed derivation.

Every random draw in the package comes from a generator keyed by a root seed
plus a path of integer counters, so any sub-step can be replayed in isolation
and parallel evaluation gives the same numbers as serial evaluation.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _key(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    if part < 0:
        raise ValueError("seed path components must be non-negative")
    return int(part)


def seed_sequence(seed: int, *path: int | str) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(seed) & _MASK64, spawn_key=tuple(_key(p) for p in path))


def derive_rng(seed: int, *path: int | str) -> np.random.Generator:
    """Return an independent generator for ``(seed, *path)``."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *path)))


def derive_seed(seed: int, *path: int | str) -> int:
    """Return a 63-bit integer seed for ``(seed, *path)``."""
    state = seed_sequence(seed, *path).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1])) & ((1 << 63) - 1)
