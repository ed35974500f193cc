"""Pair sampling for preference queries.

Pairs are drawn uniformly over distinct segment indices.  Each pair gets a
stable id so labels collected later (by the oracle or by human annotators)
can be joined back against it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SegmentPair:
    pair_id: str
    left_id: str
    right_id: str

    def to_dict(self) -> dict:
        return {"pair_id": self.pair_id, "left": self.left_id, "right": self.right_id}


def pair_id_for(k: int) -> str:
    return f"pair-{k:06d}"


def sample_pairs(segment_ids: list[str], count: int, seed: int) -> list[SegmentPair]:
    """Draw ``count`` pairs of distinct segments, uniformly with replacement
    across pairs.  The same unordered pair may appear more than once; a
    segment is never paired with itself."""
    if len(segment_ids) < 2:
        raise ValueError("need at least two segments to form pairs")
    if count < 0:
        raise ValueError("count must be non-negative")
    rng = np.random.default_rng(seed)
    n = len(segment_ids)
    pairs = []
    for k in range(count):
        i = int(rng.integers(n))
        j = int(rng.integers(n - 1))
        if j >= i:
            j += 1
        pairs.append(SegmentPair(pair_id_for(k), segment_ids[i], segment_ids[j]))
    return pairs
