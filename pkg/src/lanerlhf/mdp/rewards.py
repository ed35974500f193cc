"""Decision-step reward terms and their breakdown."""
from __future__ import annotations

from dataclasses import dataclass

from .actions import LANE_ACTIONS, Action

COLLISION_PENALTY = -10.0
LANE_CHANGE_PENALTY = -1.0


def reward_safety(collided: bool) -> float:
    return COLLISION_PENALTY if collided else 0.0


def reward_lane_change(action: Action, accepted: bool) -> float:
    """-1 only when a lane action was actually accepted this step."""
    return LANE_CHANGE_PENALTY if action in LANE_ACTIONS and accepted else 0.0


def reward_efficiency(v: float, v_min: float, v_max: float) -> float:
    """Piecewise speed reward.

        v < v_min:  (v - v_min) / (v_max - v_min)   (negative)
        v > v_max:  (v_max - v) / (v_max - v_min)   (negative)
        otherwise:  v / v_max

    Continuous at v_min only when v_min = 0.
    """
    if not v_max > v_min >= 0:
        raise ValueError(f"require v_max > v_min >= 0, got {v_min}, {v_max}")
    if v < v_min:
        return (v - v_min) / (v_max - v_min)
    if v > v_max:
        return (v_max - v) / (v_max - v_min)
    return v / v_max


@dataclass(frozen=True)
class RewardBreakdown:
    r_s: float
    r_lc: float
    r_e: float
    r_total: float

    @classmethod
    def combine(cls, r_s: float, r_lc: float, r_e: float) -> "RewardBreakdown":
        return cls(r_s=r_s, r_lc=r_lc, r_e=r_e, r_total=r_s + r_lc + r_e)
