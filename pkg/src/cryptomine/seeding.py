"""Deterministic seed derivation: one master seed, named child streams."""
from __future__ import annotations

import zlib

import numpy as np

# samples per independently seeded generation chunk
CHUNK = 4096


def derive_rng(master: int, name: str, *indices: int) -> np.random.Generator:
    """Generator keyed by (master, name, indices); independent across names/indices."""
    key = (zlib.crc32(name.encode()), *indices)
    return np.random.default_rng(np.random.SeedSequence(master, spawn_key=key))


def chunks(n: int, size: int = CHUNK):
    """Yield (chunk_index, start, stop) covering range(n)."""
    for ci, start in enumerate(range(0, n, size)):
        yield ci, start, min(start + size, n)
