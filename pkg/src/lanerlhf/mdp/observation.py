"""Observation vector: ego state, leader triples, and per-lane statistics.

Layout (length 11 + 2K for K lanes):

    [v_e, a_e,
     v_1, a_1, dy_1,   # leader in the current lane
     v_2, a_2, dy_2,   # leader in the right lane
     v_3, a_3, dy_3,   # leader in the left lane
     n_0, vbar_0, ..., n_{K-1}, vbar_{K-1}]

dy is the bumper-to-bumper gap ahead of the ego.  An absent leader or an
absent lane contributes (0, 0, GAP_SENTINEL_M).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..sim import WorldState, lane_stats, leading_vehicle

# Raw gap substituted when no leader exists, m.
GAP_SENTINEL_M = 1000.0
# Normalization constants: gaps are scaled by 100 m and clipped to [0, 10],
# accelerations by 8 m/s^2, lane counts by 10; speeds use the road v_max.
GAP_NORM_M = 100.0
GAP_NORM_MAX = 10.0
ACCEL_NORM = 8.0
COUNT_NORM = 10.0


@dataclass(frozen=True)
class Observation:
    raw: np.ndarray
    normalized: np.ndarray


def obs_dim(lane_count: int) -> int:
    return 11 + 2 * lane_count


def build_observation(w: WorldState, ego_id: str = "ego") -> Observation:
    ego = w.vehicle(ego_id)
    road = w.road
    k = road.lane_count
    raw = np.zeros(obs_dim(k), dtype=np.float64)
    raw[0] = ego.v
    raw[1] = ego.a
    # Slot order: current lane, right lane, left lane.
    for slot, lane in enumerate((ego.lane, ego.lane + 1, ego.lane - 1)):
        base = 2 + 3 * slot
        if 0 <= lane < k:
            lead = leading_vehicle(w, ego, lane)
        else:
            lead = None
        if lead is None:
            raw[base + 2] = GAP_SENTINEL_M
        else:
            veh, gap = lead
            raw[base] = veh.v
            raw[base + 1] = veh.a
            raw[base + 2] = gap
    for lane, (n, vbar) in enumerate(lane_stats(w)):
        raw[11 + 2 * lane] = float(n)
        raw[12 + 2 * lane] = vbar

    norm = raw.copy()
    norm[0] = raw[0] / road.v_max
    norm[1] = raw[1] / ACCEL_NORM
    for slot in range(3):
        base = 2 + 3 * slot
        norm[base] = raw[base] / road.v_max
        norm[base + 1] = raw[base + 1] / ACCEL_NORM
        norm[base + 2] = min(max(raw[base + 2] / GAP_NORM_M, 0.0), GAP_NORM_MAX)
    for lane in range(k):
        norm[11 + 2 * lane] = raw[11 + 2 * lane] / COUNT_NORM
        norm[12 + 2 * lane] = raw[12 + 2 * lane] / road.v_max
    return Observation(raw=raw, normalized=norm)


def current_lane_gap(w: WorldState, ego_id: str = "ego") -> float:
    """Gap to the current-lane leader, GAP_SENTINEL_M when there is none.

    Shared by preference collection and evaluation so the lane-change gap
    metric is measured identically everywhere.
    """
    ego = w.vehicle(ego_id)
    lead = leading_vehicle(w, ego, ego.lane)
    return lead[1] if lead else GAP_SENTINEL_M
