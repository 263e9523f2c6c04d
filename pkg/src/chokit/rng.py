"""Deterministic, order-independent random streams.

Every stochastic quantity in the toolkit is drawn from a named substream
derived from a root seed and a path of labels, e.g.
``substream(seed, "train", "noise", 1234)``.  Substreams are built on the
counter-based Philox generator, so the content of item ``i`` never depends
on how many items were drawn before it or on which worker produced it.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK32 = (1 << 32) - 1


def _component(part: int | str) -> int:
    if isinstance(part, str):
        digest = hashlib.blake2b(part.encode("utf-8"), digest_size=4).digest()
        return int.from_bytes(digest, "big")
    value = int(part)
    if value < 0:
        raise ValueError(f"substream path components must be non-negative, got {part!r}")
    return value & _MASK32


def substream(seed: int, *path: int | str) -> np.random.Generator:
    """Return a Generator for the substream identified by ``path`` under ``seed``."""
    key = tuple(_component(p) for p in path)
    seq = np.random.SeedSequence(int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(seq))


def derive_seed(seed: int, *path: int | str) -> int:
    """Collapse a substream path to a plain integer seed (stable across runs)."""
    key = tuple(_component(p) for p in path)
    state = np.random.SeedSequence(int(seed), spawn_key=key).generate_state(1, np.uint64)
    return int(state[0])
