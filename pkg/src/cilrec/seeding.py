"""Stable derivation of random generators from structured keys.

Every stochastic quantity in the package is produced by a generator keyed
on the values that should determine it (seeds, class ids, purpose tags).
The mapping from keys to generator state is a cryptographic hash, so it is
stable across processes, platforms and interpreter restarts.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*keys: int | str) -> int:
    """Hash ``keys`` into a 128-bit integer seed.

    Keys are length-prefixed before hashing so that no two distinct key
    tuples collide by concatenation.
    """
    digest = hashlib.blake2b(digest_size=16)
    for key in keys:
        if not isinstance(key, (int, str)):
            raise TypeError(f"rng keys must be int or str, got {type(key).__name__}")
        part = f"{type(key).__name__}:{key}".encode("utf-8")
        digest.update(len(part).to_bytes(4, "little"))
        digest.update(part)
    return int.from_bytes(digest.digest(), "little")


def keyed_rng(*keys: int | str) -> np.random.Generator:
    """Return a generator whose state is a pure function of ``keys``."""
    return np.random.default_rng(np.random.SeedSequence(derive_seed(*keys)))
