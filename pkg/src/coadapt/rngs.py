"""Deterministic seed derivation.

Every random draw in the pipeline comes from a stream derived from the
master seed plus a tuple of purpose tags, so results never depend on
execution order and run units can be dispatched to parallel workers without
changing any output.
"""

from __future__ import annotations

import zlib

import numpy as np


def _tag_to_int(tag: int | str) -> int:
    if isinstance(tag, str):
        return zlib.crc32(tag.encode())
    return int(tag) & 0xFFFFFFFF


def seed_sequence(master_seed: int, *tags: int | str) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed)] + [_tag_to_int(t) for t in tags])


def derive_rng(master_seed: int, *tags: int | str) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(master_seed, *tags))


def derive_seed(master_seed: int, *tags: int | str) -> int:
    """A plain integer seed (for APIs that take one, e.g. input features)."""
    return int(seed_sequence(master_seed, *tags).generate_state(1)[0])
