"""Seeded randomness helpers.

Every random decision in the toolkit flows from one integer master seed.
Independent uses (bootstrap draws, tie-breaking, dataset splits, benchmark
generation) each get their own named substream so that adding a consumer in
one place never perturbs the draws seen by another.
"""
from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_seed", "substream"]


def derive_seed(seed: int, *parts: object) -> int:
    """Derive a stable 64-bit seed from a master seed and a label path."""
    h = hashlib.sha256()
    h.update(str(int(seed)).encode("ascii"))
    for part in parts:
        h.update(b"/")
        h.update(str(part).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big")


def substream(seed: int, *parts: object) -> np.random.Generator:
    """Return an independent generator for one named use of the master seed."""
    return np.random.default_rng(derive_seed(seed, *parts))
