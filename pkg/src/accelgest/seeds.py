"""Deterministic sub-seed derivation.

Every stochastic step in the pipeline draws from a numpy Generator seeded by
``derive_seed(root, *parts)`` so that a single root seed reproduces a whole
run while independent steps get independent streams.  The derivation is the
first 8 bytes (little-endian) of SHA-256 over ``"<root>/<part>/<part>..."``.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(root: int, *parts: object) -> int:
    """Derive a 64-bit sub-seed from a root seed and a label path."""
    h = hashlib.sha256()
    h.update(str(int(root)).encode())
    for part in parts:
        h.update(b"/")
        h.update(str(part).encode())
    return int.from_bytes(h.digest()[:8], "little")


def rng_for(root: int, *parts: object) -> np.random.Generator:
    """Generator for one named step of a seeded run."""
    return np.random.default_rng(derive_seed(root, *parts))
