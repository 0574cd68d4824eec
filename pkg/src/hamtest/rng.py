"""Seeded counter-based random streams (Philox) and disjoint substreams."""

from __future__ import annotations

import numpy as np

SeedLike = int | np.random.SeedSequence


def make_rng(seed: SeedLike) -> np.random.Generator:
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(seq))


def substreams(seed: SeedLike, count: int) -> list[np.random.SeedSequence]:
    """``count`` independent child seeds; child ``k`` depends only on ``(seed, k)``."""
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    return seq.spawn(count)
