"""Counter-based random streams.

Every random draw in the package comes from a Philox generator whose key is
derived from ``(seed, replicate_id, *keys)``. There is no global RNG state, so
replicates can be generated in any order or in parallel and still reproduce
bit for bit.
"""
from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _word(key) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    if isinstance(key, float):
        return zlib.crc32(repr(key).encode("ascii"))
    k = int(key)
    # zigzag so negative cell indices stay distinct and nonnegative
    return 2 * k if k >= 0 else -2 * k - 1


def stream(seed: int, replicate_id: int = 0, *keys) -> np.random.Generator:
    """Return an independent generator for the given key path.

    ``keys`` may mix ints (cell indices, sample sizes) and strings (stream
    names); floats are hashed through their repr.
    """
    spawn = (_word(replicate_id),) + tuple(_word(k) for k in keys)
    ss = np.random.SeedSequence(entropy=_word(seed) & _MASK64, spawn_key=spawn)
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *keys) -> int:
    """Deterministically derive a 63-bit child seed."""
    ss = np.random.SeedSequence(entropy=_word(seed) & _MASK64,
                                spawn_key=tuple(_word(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
