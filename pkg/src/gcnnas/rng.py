"""Deterministic random streams.

All randomness in a run flows from one root seed. Named sub-streams are
derived by hashing the stream key into a SeedSequence spawn key, so the
stream a component sees never depends on call order elsewhere.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_to_int(key) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    return int(key) & 0xFFFFFFFF


def spawn_rng(seed: int, *keys) -> np.random.Generator:
    """Generator for the sub-stream identified by ``keys`` under ``seed``."""
    spawn_key = tuple(_key_to_int(k) for k in keys)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=spawn_key)
    return np.random.Generator(np.random.PCG64(ss))
