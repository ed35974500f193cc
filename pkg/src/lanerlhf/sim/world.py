"""World construction and physics stepping."""
from __future__ import annotations

from typing import Optional

from .idm import idm_acceleration
from .types import (
    KIND_EGO,
    KIND_OBSTACLE,
    IdmParams,
    LaneChangeProgress,
    ScenarioConfig,
    SpawnEvent,
    VehicleState,
    WorldState,
)


def init_world(scenario: ScenarioConfig, seed: int) -> WorldState:
    """Build the initial world and insert every spawn due at t = 0."""
    w = WorldState(scenario=scenario, seed=seed)
    for i, ob in enumerate(scenario.obstacles):
        w.vehicles.append(
            VehicleState(
                id=f"obstacle-{i}",
                x=ob.x,
                lane=ob.lane,
                v=0.0,
                v_cap=0.0,
                length_m=ob.length_m,
                kind=KIND_OBSTACLE,
            )
        )
    spawns = [scenario.ego, *scenario.others]
    # Stable order: spawn time first, declaration order as tie-break.
    w.pending = sorted(enumerate(spawns), key=lambda iv: (iv[1].t_spawn, iv[0]))
    w.pending = [ev for _, ev in w.pending]
    _insert_due_spawns(w)
    return w


def _insert_due_spawns(w: WorldState) -> None:
    while w.pending and w.pending[0].t_spawn <= w.t + 1e-12:
        ev = w.pending.pop(0)
        vid = ev.id or (ev.kind if ev.kind == KIND_EGO else f"social-{len(w.vehicles)}")
        tmpl = w.scenario.idm
        w.vehicles.append(
            VehicleState(
                id=vid,
                x=ev.x0,
                lane=ev.lane,
                v=ev.v0,
                v_cap=ev.v_cap,
                length_m=ev.length_m,
                kind=ev.kind,
                idm=IdmParams(
                    v0=ev.v_cap,
                    a_max=tmpl.a_max,
                    b_comf=tmpl.b_comf,
                    s0=tmpl.s0,
                    t_headway=tmpl.t_headway,
                    delta=tmpl.delta,
                ),
            )
        )


def leading_vehicle(
    w: WorldState, ref: VehicleState, lane: int
) -> Optional[tuple[VehicleState, float]]:
    """Nearest vehicle ahead of ref in the given lane, with bumper gap.

    Gap is leader.x - leader.length_m - ref.x and may be negative when the
    intervals overlap.  Returns None when nothing is ahead.
    """
    best = None
    best_x = None
    for v in w.vehicles:
        if v is ref or v.lane != lane:
            continue
        if v.x > ref.x and (best_x is None or v.x < best_x):
            best, best_x = v, v.x
    if best is None:
        return None
    return best, best.x - best.length_m - ref.x


def lane_stats(w: WorldState) -> list[tuple[int, float]]:
    """Per lane (vehicle count, mean speed); empty lanes report (0, 0.0).

    Maneuvering vehicles count in their current lane attribute only, so the
    counts always sum to the vehicle total.
    """
    counts = [0] * w.road.lane_count
    sums = [0.0] * w.road.lane_count
    for v in w.vehicles:
        counts[v.lane] += 1
        sums[v.lane] += v.v
    return [(c, s / c if c else 0.0) for c, s in zip(counts, sums)]


def detect_collisions(w: WorldState) -> set[str]:
    """Ids of vehicles whose body intervals strictly overlap in a shared lane."""
    hit: set[str] = set()
    vs = w.vehicles
    for i in range(len(vs)):
        for j in range(i + 1, len(vs)):
            a, b = vs[i], vs[j]
            if not set(a.occupied_lanes()) & set(b.occupied_lanes()):
                continue
            if a.x - a.length_m < b.x and b.x - b.length_m < a.x:
                hit.add(a.id)
                hit.add(b.id)
    return hit


def begin_lane_change(w: WorldState, veh_id: str, direction: int) -> bool:
    """Install a lane-change maneuver; direction -1 is left, +1 right.

    Rejected (returns False, no state change) when the target lane is off
    the road or the vehicle is already mid-maneuver.
    """
    if direction not in (-1, 1):
        raise ValueError(f"direction must be -1 or +1, got {direction}")
    veh = w.vehicle(veh_id)
    target = veh.lane + direction
    if veh.maneuver is not None or not 0 <= target < w.road.lane_count:
        return False
    total = w.scenario.lc_total_ticks
    veh.maneuver = LaneChangeProgress(
        target_lane=target, ticks_remaining=total, total_ticks=total, from_lane=veh.lane
    )
    return True


def _advance_kinematics(veh: VehicleState, a: float, dt: float) -> None:
    """Constant-acceleration step with saturation at v = 0 and v = v_cap."""
    v0 = veh.v
    v1 = v0 + a * dt
    if a < 0.0 and v1 < 0.0:
        # Stops within the step; advance only to the stopping point.
        t_stop = v0 / -a
        veh.x += v0 * t_stop + 0.5 * a * t_stop * t_stop
        veh.v = 0.0
    elif a > 0.0 and v1 > veh.v_cap:
        t_cap = (veh.v_cap - v0) / a
        veh.x += v0 * t_cap + 0.5 * a * t_cap * t_cap + veh.v_cap * (dt - t_cap)
        veh.v = veh.v_cap
    else:
        veh.x += v0 * dt + 0.5 * a * dt * dt
        veh.v = v1
    veh.a = (veh.v - v0) / dt


def _progress_maneuver(w: WorldState, veh: VehicleState) -> None:
    m = veh.maneuver
    if m is None:
        return
    m.ticks_remaining -= 1
    width = w.road.lane_width_m
    to_target = 1.0 if m.target_lane > m.from_lane else -1.0
    progress = 1.0 - m.ticks_remaining / m.total_ticks
    # Absolute lateral position interpolates linearly from the source lane
    # center to the target lane center; the lane attribute flips at midpoint.
    if m.ticks_remaining <= 0:
        veh.lane = m.target_lane
        veh.lateral_offset = 0.0
        veh.maneuver = None
    elif progress >= 0.5:
        veh.lane = m.target_lane
        veh.lateral_offset = -to_target * (1.0 - progress) * width
    else:
        veh.lane = m.from_lane
        veh.lateral_offset = to_target * progress * width
    if veh.lateral_offset != 0.0 and abs(veh.lateral_offset) > width:
        raise AssertionError("lateral offset left the lane pair")


def step_physics(w: WorldState, ego_accel_cmd: Optional[float] = None) -> WorldState:
    """Advance one physics tick in place and return the world.

    Accelerations are computed synchronously from the pre-step state.  The
    ego command is passed through the IDM governor, applied = min(cmd, idm);
    with no command the ego follows IDM alone.  Social vehicles follow IDM
    in their lane; ballistic vehicles (idm=None) keep constant speed.
    """
    accels: list[float] = []
    for veh in w.vehicles:
        if veh.kind == KIND_OBSTACLE or veh.idm is None:
            accels.append(0.0)
            continue
        lead = leading_vehicle(w, veh, veh.lane)
        a = idm_acceleration(veh, lead[0] if lead else None, veh.idm)
        if veh.kind == KIND_EGO and ego_accel_cmd is not None:
            a = min(ego_accel_cmd, a)
        accels.append(a)
    dt = w.scenario.physics_dt
    for veh, a in zip(w.vehicles, accels):
        if veh.kind == KIND_OBSTACLE:
            continue
        _advance_kinematics(veh, a, dt)
        _progress_maneuver(w, veh)
    # Social vehicles leave the world once fully past the road end.
    w.vehicles = [
        v
        for v in w.vehicles
        if v.kind == KIND_EGO or v.x - v.length_m <= w.road.length_m
    ]
    w.collision_flags |= detect_collisions(w)
    w.tick += 1
    # Spawns due at the new time join now, so they exist in the state at
    # their spawn time and first move during the following tick.
    _insert_due_spawns(w)
    return w
