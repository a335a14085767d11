"""Order-free random streams.

Every stream is addressed by a key path such as ``(replication, level)``
under a master seed. Streams are built from Philox, a counter-based
generator, so any stream can be materialised without touching its siblings.
"""
from __future__ import annotations

import numpy as np


def seed_sequence(master_seed: int, *keys: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in keys))


def child(ss: np.random.SeedSequence, *keys: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + tuple(int(k) for k in keys))


def generator(ss: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(ss))


def stream(master_seed: int, *keys: int) -> np.random.Generator:
    """Generator for the stream at ``keys`` under ``master_seed``."""
    return generator(seed_sequence(master_seed, *keys))


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return seed_sequence(seed)
