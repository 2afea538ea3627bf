"""Seed handling shared by every sampler."""
from __future__ import annotations

import numpy as np


def as_generator(seed=None) -> np.random.Generator:
    """Accept an int seed, a SeedSequence, an existing Generator or None."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn(seed, n: int) -> list[np.random.Generator]:
    """Independent child streams for batch-parallel work."""
    if isinstance(seed, np.random.Generator):
        return seed.spawn(n)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(n)]
