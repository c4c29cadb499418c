"""Derivation of independent, reproducible random streams.

Every sample gets its own generator derived from (seed, task, scene_id,
sample_index), so adding a task or a scene never perturbs the stream of
any other sample, and workers can draw in parallel without coordination.
"""

from __future__ import annotations

import hashlib

import numpy as np

_DOMAIN = b"sceneinstruct.rng.v1"


def _encode_key(key) -> bytes:
    # type-tagged encoding so ("1",) and (1,) derive different streams
    if isinstance(key, bool):
        raise TypeError("bool keys are ambiguous; use int or str")
    if isinstance(key, int):
        return b"i" + key.to_bytes(16, "big", signed=True)
    if isinstance(key, str):
        raw = key.encode("utf-8")
        return b"s" + len(raw).to_bytes(4, "big") + raw
    raise TypeError(f"unsupported rng key type: {type(key).__name__}")


def derive_entropy(seed: int, *keys) -> int:
    """Collision-resistant 256-bit entropy for (seed, *keys)."""
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    h = hashlib.sha256()
    h.update(_DOMAIN)
    h.update(seed.to_bytes(8, "big"))
    for key in keys:
        h.update(_encode_key(key))
    return int.from_bytes(h.digest(), "big")


def derive_rng(seed: int, *keys) -> np.random.Generator:
    """Independent generator for the stream named by (seed, *keys)."""
    entropy = derive_entropy(seed, *keys)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
