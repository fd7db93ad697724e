"""Deterministic, splittable random streams.

Every random draw in the library comes from a counter-based Philox stream
keyed by a user seed plus a structural path such as ``("init", layer, "w")``.
Streams for distinct paths are independent, so a component's randomness never
depends on how much any other component has drawn, and results are
bit-reproducible regardless of evaluation order or worker count.
"""
from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _fold(path: tuple) -> int:
    """Collapse a mixed tuple into a stable 64-bit value."""
    h = hashlib.blake2b(digest_size=8)
    for part in path:
        h.update(repr(part).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def stream(seed: int, *path) -> np.random.Generator:
    """Independent generator for (seed, *path), stable across runs."""
    key = np.array([seed & _MASK64, _fold(path)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def child_seed(seed: int, *path) -> int:
    """Derive a 64-bit sub-seed, e.g. for ensemble member networks."""
    return _fold((seed & _MASK64,) + path)
