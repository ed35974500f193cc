"""Turn labeled segment pairs into reward-model training arrays.

Each non-skip label contributes two rows, left segment first: the preferred
side gets class 1, the other side class 0.  Rows are the per-decision
normalized observation series of the segment, shape (T, obs_dim).
"""
from __future__ import annotations

from typing import Iterable

import numpy as np

from .oracle import CHOICE_LEFT, CHOICE_RIGHT, CHOICE_SKIP, PreferenceLabel
from .segments import TrajectorySegment


def export_training_set(
    labels: Iterable[PreferenceLabel],
    segments_by_id: dict[str, TrajectorySegment],
) -> tuple[np.ndarray, np.ndarray]:
    """Returns ``(X, y)`` with ``X`` of shape (N, T, obs_dim) and ``y`` in
    {0, 1}.  Skipped pairs are dropped; all referenced segments must share
    one window length and observation size."""
    xs: list[np.ndarray] = []
    ys: list[int] = []
    for rec in labels:
        if rec.choice == CHOICE_SKIP:
            continue
        if rec.choice not in (CHOICE_LEFT, CHOICE_RIGHT):
            raise ValueError(f"bad choice {rec.choice!r} in label {rec.pair_id}")
        for side_id, side in ((rec.left_id, CHOICE_LEFT), (rec.right_id, CHOICE_RIGHT)):
            seg = segments_by_id.get(side_id)
            if seg is None:
                raise KeyError(f"label {rec.pair_id} references unknown segment {side_id}")
            xs.append(seg.obs_series())
            ys.append(1 if rec.choice == side else 0)
    if not xs:
        return np.zeros((0, 0, 0)), np.zeros((0,), dtype=np.int64)
    shape = xs[0].shape
    for a in xs:
        if a.shape != shape:
            raise ValueError(f"segment series shapes differ: {a.shape} vs {shape}")
    return np.stack(xs), np.asarray(ys, dtype=np.int64)
