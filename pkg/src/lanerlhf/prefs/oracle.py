"""Synthetic preference oracle with a tunable driving style.

The oracle compares two trajectory segments and either picks a side or skips
the pair.  Rules, applied in order:

1. Either segment contains a collision: skip (crashes poison the comparison).
2. Neither segment contains a lane change: skip (nothing to judge).
3. Exactly one segment changes lane, with front gap ``g`` at the change:
   a conservative oracle prefers the non-changing side iff ``g`` is below the
   gap threshold (the change looked risky), otherwise skips; an aggressive
   oracle prefers the changing side iff ``g`` is below the threshold (the
   change was bold), otherwise skips.
4. Both segments change lane: conservative prefers the larger gap,
   aggressive the smaller; gaps closer than the tie band are skipped.

An optional noise rate flips the chosen side (never turns a preference into
a skip or vice versa), emulating inconsistent annotators.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from ..evaluation import GAP_THRESHOLD_M
from .segments import TrajectorySegment
from .pairs import SegmentPair

STYLE_CONSERVATIVE = "conservative"
STYLE_AGGRESSIVE = "aggressive"
STYLES = (STYLE_CONSERVATIVE, STYLE_AGGRESSIVE)

CHOICE_LEFT = "left"
CHOICE_RIGHT = "right"
CHOICE_SKIP = "skip"

GAP_TIE_BAND_M = 5.0


@dataclass(frozen=True)
class PreferenceLabel:
    pair_id: str
    left_id: str
    right_id: str
    choice: str  # "left" | "right" | "skip"
    annotator: str
    style: Optional[str] = None
    timestamp: Optional[str] = None

    def to_dict(self) -> dict:
        return asdict(self)


def oracle_choice(
    left: TrajectorySegment,
    right: TrajectorySegment,
    style: str,
    threshold_m: float = GAP_THRESHOLD_M,
    tie_band_m: float = GAP_TIE_BAND_M,
) -> str:
    """Deterministic (noise-free) choice for a pair under the given style."""
    if style not in STYLES:
        raise ValueError(f"unknown style {style!r}; expected one of {STYLES}")
    if left.collision_in_segment or right.collision_in_segment:
        return CHOICE_SKIP
    lc_l, lc_r = left.lane_change_occurred, right.lane_change_occurred
    if not lc_l and not lc_r:
        return CHOICE_SKIP
    if lc_l != lc_r:
        changer, changer_side = (left, CHOICE_LEFT) if lc_l else (right, CHOICE_RIGHT)
        keeper_side = CHOICE_RIGHT if lc_l else CHOICE_LEFT
        gap = changer.gap_at_lane_change
        if gap is None or gap >= threshold_m:
            return CHOICE_SKIP
        return keeper_side if style == STYLE_CONSERVATIVE else changer_side
    gap_l, gap_r = left.gap_at_lane_change, right.gap_at_lane_change
    if gap_l is None or gap_r is None:
        return CHOICE_SKIP
    if abs(gap_l - gap_r) <= tie_band_m:
        return CHOICE_SKIP
    if style == STYLE_CONSERVATIVE:
        return CHOICE_LEFT if gap_l > gap_r else CHOICE_RIGHT
    return CHOICE_LEFT if gap_l < gap_r else CHOICE_RIGHT


def label_from_dict(d: dict) -> PreferenceLabel:
    return PreferenceLabel(
        pair_id=d["pair_id"],
        left_id=d["left_id"],
        right_id=d["right_id"],
        choice=d["choice"],
        annotator=d.get("annotator", ""),
        style=d.get("style"),
        timestamp=d.get("timestamp"),
    )


class StyleOracle:
    """Labels segment pairs according to a driving style, with optional
    label noise.  Pairs are labeled in order, so a fixed seed gives a fixed
    label set."""

    def __init__(
        self,
        style: str,
        noise: float = 0.0,
        seed: int = 0,
        threshold_m: float = GAP_THRESHOLD_M,
        tie_band_m: float = GAP_TIE_BAND_M,
    ):
        if style not in STYLES:
            raise ValueError(f"unknown style {style!r}; expected one of {STYLES}")
        if not 0.0 <= noise <= 1.0:
            raise ValueError("noise must be in [0, 1]")
        self.style = style
        self.noise = noise
        self.threshold_m = threshold_m
        self.tie_band_m = tie_band_m
        self._rng = np.random.default_rng(seed)

    @property
    def annotator(self) -> str:
        return f"oracle:{self.style}"

    def label(self, pair: SegmentPair, left: TrajectorySegment, right: TrajectorySegment) -> PreferenceLabel:
        choice = oracle_choice(left, right, self.style, self.threshold_m, self.tie_band_m)
        if choice != CHOICE_SKIP and self.noise > 0.0:
            if self._rng.random() < self.noise:
                choice = CHOICE_RIGHT if choice == CHOICE_LEFT else CHOICE_LEFT
        return PreferenceLabel(
            pair_id=pair.pair_id,
            left_id=pair.left_id,
            right_id=pair.right_id,
            choice=choice,
            annotator=self.annotator,
            style=self.style,
        )

    def label_pairs(
        self,
        pairs: list[SegmentPair],
        segments_by_id: dict[str, TrajectorySegment],
    ) -> list[PreferenceLabel]:
        out = []
        for pair in pairs:
            left = segments_by_id[pair.left_id]
            right = segments_by_id[pair.right_id]
            out.append(self.label(pair, left, right))
        return out
