"""Labeled random streams derived from a single master seed.

A stream is identified by ``(seed, label, index)``.  The label is hashed to
a 64-bit integer with BLAKE2b and used, together with the index, as the
spawn key of a :class:`numpy.random.SeedSequence` whose entropy is the
master seed.  Streams therefore do not depend on creation order, thread
count or on which other streams exist.
"""
from __future__ import annotations

import hashlib

import numpy as np
from scipy.special import ndtri

# keeps ndtri finite; uniforms from Generator.random lie in [0, 1)
_U_TINY = 2.0 ** -60


def label_key(seed: int, label: str) -> int:
    digest = hashlib.blake2b(f"{seed}:{label}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(seed: int, label: str, index: int | None = None) -> np.random.Generator:
    key = (label_key(seed, label),) if index is None else (label_key(seed, label), index)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def normals_from_uniforms(u) -> np.ndarray:
    """Standard normal deviates by inverse-CDF transform of uniforms."""
    return ndtri(np.clip(u, _U_TINY, 1.0 - 2.0 ** -53))
