"""Discrete decision-level action set."""
from __future__ import annotations

from enum import IntEnum

# Commanded longitudinal accelerations, m/s^2.
ACCEL_CMD = 2.0
DECEL_CMD = -2.0


class Action(IntEnum):
    LANE_LEFT = 0
    LANE_RIGHT = 1
    KEEP = 2
    ACCELERATE = 3
    DECELERATE = 4


N_ACTIONS = len(Action)

LANE_ACTIONS = (Action.LANE_LEFT, Action.LANE_RIGHT)


def lane_direction(action: Action) -> int:
    """-1 for a left change, +1 for right; lanes are indexed left to right."""
    if action == Action.LANE_LEFT:
        return -1
    if action == Action.LANE_RIGHT:
        return 1
    raise ValueError(f"{action!r} is not a lane action")
