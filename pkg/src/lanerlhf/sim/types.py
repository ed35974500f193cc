"""Core data types for the highway simulator."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

KIND_EGO = "ego"
KIND_SOCIAL = "social"
KIND_OBSTACLE = "obstacle"

# Hard deceleration floor applied after the IDM law, m/s^2.
EMERGENCY_DECEL = -8.0


@dataclass
class RoadConfig:
    """Straight multi-lane road segment.

    Lane indices run 0..lane_count-1 from the leftmost lane; "right" means
    a higher lane index.  v_max / v_min are the legal bounds in m/s used by
    the efficiency reward and observation normalization.
    """

    length_m: float
    lane_count: int
    lane_width_m: float
    v_max: float
    v_min: float = 0.0

    def __post_init__(self):
        if self.lane_count < 2:
            raise ValueError(f"lane_count must be >= 2, got {self.lane_count}")
        if self.length_m <= 0:
            raise ValueError(f"length_m must be positive, got {self.length_m}")
        if self.lane_width_m <= 0:
            raise ValueError(f"lane_width_m must be positive, got {self.lane_width_m}")
        if not self.v_max > self.v_min >= 0:
            raise ValueError(
                f"require v_max > v_min >= 0, got v_max={self.v_max} v_min={self.v_min}"
            )

    def lane_center(self, lane: int) -> float:
        """Lateral coordinate of a lane center, m from the left road edge."""
        return (lane + 0.5) * self.lane_width_m


@dataclass
class IdmParams:
    """Intelligent Driver Model parameters. v0 is the desired speed, m/s."""

    v0: float
    a_max: float = 2.0
    b_comf: float = 2.0
    s0: float = 2.0
    t_headway: float = 1.5
    delta: float = 4.0

    def __post_init__(self):
        if self.v0 <= 0:
            raise ValueError(f"v0 must be positive, got {self.v0}")
        if self.a_max <= 0 or self.b_comf <= 0:
            raise ValueError("a_max and b_comf must be positive")


@dataclass
class LaneChangeProgress:
    """State of an in-flight lane-change maneuver."""

    target_lane: int
    ticks_remaining: int
    total_ticks: int
    from_lane: int


@dataclass
class VehicleState:
    """A single vehicle.  x is the front-bumper position, m from road start.

    The vehicle occupies [x - length_m, x].  lateral_offset is measured from
    the center of the current lane; it is nonzero only mid-maneuver.  idm may
    be None for a ballistic (constant-speed) vehicle; obstacles are fixed.
    """

    id: str
    x: float
    lane: int
    v: float
    v_cap: float
    length_m: float = 5.0
    kind: str = KIND_SOCIAL
    a: float = 0.0
    lateral_offset: float = 0.0
    maneuver: Optional[LaneChangeProgress] = None
    idm: Optional[IdmParams] = None

    def occupied_lanes(self) -> tuple[int, ...]:
        """Lanes this vehicle occupies for collision purposes.

        A maneuvering vehicle occupies both source and target lanes for the
        whole maneuver duration.
        """
        if self.maneuver is None:
            return (self.lane,)
        other = (
            self.maneuver.target_lane
            if self.lane == self.maneuver.from_lane
            else self.maneuver.from_lane
        )
        return (self.lane, other)


@dataclass
class SpawnEvent:
    """A vehicle entering the world at t_spawn."""

    t_spawn: float
    lane: int
    x0: float
    v0: float
    v_cap: float
    kind: str = KIND_SOCIAL
    length_m: float = 5.0
    id: Optional[str] = None


@dataclass
class ObstacleSpec:
    """A stationary vehicle parked in a lane."""

    x: float
    lane: int
    length_m: float = 5.0


@dataclass
class ScenarioConfig:
    """Full scenario description: road, timing grid, and spawn schedule."""

    name: str
    road: RoadConfig
    physics_dt: float
    decision_dt: float
    episode_limit_s: float
    warmup_s: float
    segment_len_s: float
    ego: SpawnEvent
    others: list[SpawnEvent] = field(default_factory=list)
    obstacles: list[ObstacleSpec] = field(default_factory=list)
    lc_duration_s: float = 1.0
    idm: IdmParams = None  # template; v0 is overridden per vehicle by its v_cap

    def __post_init__(self):
        if self.idm is None:
            self.idm = IdmParams(v0=self.road.v_max)
        if self.physics_dt <= 0 or self.decision_dt <= 0:
            raise ValueError("physics_dt and decision_dt must be positive")
        for label, coarse, fine in (
            ("decision_dt/physics_dt", self.decision_dt, self.physics_dt),
            ("segment_len_s/decision_dt", self.segment_len_s, self.decision_dt),
            ("lc_duration_s/physics_dt", self.lc_duration_s, self.physics_dt),
        ):
            ratio = coarse / fine
            if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
                raise ValueError(f"{label} must be a whole positive multiple, got {ratio}")
        if self.warmup_s < 0:
            raise ValueError("warmup_s must be >= 0")
        if self.episode_limit_s <= self.warmup_s:
            raise ValueError("episode_limit_s must exceed warmup_s")
        for ev in [self.ego, *self.others]:
            self._check_spawn(ev)
        for ob in self.obstacles:
            if not 0 <= ob.lane < self.road.lane_count:
                raise ValueError(f"obstacle lane {ob.lane} outside road")
            if not 0 < ob.x <= self.road.length_m:
                raise ValueError(f"obstacle at x={ob.x} outside road")
        if self.ego.kind != KIND_EGO:
            raise ValueError("ego spawn must have kind 'ego'")

    def _check_spawn(self, ev: SpawnEvent):
        if not 0 <= ev.lane < self.road.lane_count:
            raise ValueError(f"spawn lane {ev.lane} outside road for {ev.id or ev.kind}")
        if not 0 < ev.x0 <= self.road.length_m:
            raise ValueError(f"spawn x0={ev.x0} outside road for {ev.id or ev.kind}")
        if ev.v0 < 0 or ev.v_cap <= 0 or ev.v0 > ev.v_cap + 1e-9:
            raise ValueError(f"spawn speeds invalid for {ev.id or ev.kind}")
        if ev.t_spawn < 0:
            raise ValueError("t_spawn must be >= 0")

    @property
    def substeps_per_decision(self) -> int:
        return round(self.decision_dt / self.physics_dt)

    @property
    def lc_total_ticks(self) -> int:
        return round(self.lc_duration_s / self.physics_dt)


@dataclass
class WorldState:
    """Mutable world: the vehicle list is ordered by insertion (ego first)."""

    scenario: ScenarioConfig
    seed: int
    tick: int = 0
    vehicles: list[VehicleState] = field(default_factory=list)
    pending: list[SpawnEvent] = field(default_factory=list)
    collision_flags: set[str] = field(default_factory=set)

    @property
    def t(self) -> float:
        return self.tick * self.scenario.physics_dt

    @property
    def road(self) -> RoadConfig:
        return self.scenario.road

    def vehicle(self, veh_id: str) -> VehicleState:
        for v in self.vehicles:
            if v.id == veh_id:
                return v
        raise KeyError(f"no vehicle {veh_id!r}")

    def ego(self) -> VehicleState:
        return self.vehicle("ego")

    def lateral_position(self, veh: VehicleState) -> float:
        """Absolute lateral coordinate of the vehicle center, m from left edge."""
        return self.road.lane_center(veh.lane) + veh.lateral_offset

    def snapshot(self) -> tuple:
        """Hashable full-precision state tuple, for determinism checks."""
        return (
            self.tick,
            tuple(
                (v.id, v.x, v.lane, v.lateral_offset, v.v, v.a)
                for v in self.vehicles
            ),
            tuple(sorted(self.collision_flags)),
        )
