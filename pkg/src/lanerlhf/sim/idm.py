"""Intelligent Driver Model car-following law."""
from __future__ import annotations

import math
from typing import Optional

from .types import EMERGENCY_DECEL, IdmParams, VehicleState


def idm_acceleration(
    follower: VehicleState,
    leader: Optional[VehicleState],
    p: IdmParams,
) -> float:
    """IDM acceleration for a follower, m/s^2.

        a = a_max * (1 - (v/v0)^delta - (s*/s)^2)
        s* = s0 + v*T + v*dv / (2*sqrt(a_max*b_comf))

    where s is the bumper-to-bumper gap and dv = v_follower - v_leader.
    With no leader the interaction term is dropped.  The result is clamped
    to [EMERGENCY_DECEL, a_max]; a non-positive gap returns the emergency
    floor directly.
    """
    v = follower.v
    free = 1.0 - (v / p.v0) ** p.delta
    if leader is None:
        a = p.a_max * free
    else:
        s = leader.x - leader.length_m - follower.x
        if s <= 0.0:
            return EMERGENCY_DECEL
        dv = v - leader.v
        s_star = p.s0 + v * p.t_headway + v * dv / (2.0 * math.sqrt(p.a_max * p.b_comf))
        a = p.a_max * (free - (s_star / s) ** 2)
    return min(p.a_max, max(EMERGENCY_DECEL, a))
