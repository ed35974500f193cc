from .idm import idm_acceleration
from .scenario import ScenarioError, load_scenario, parse_speed, resolve_scenario, scenario_from_dict
from .types import (
    EMERGENCY_DECEL,
    KIND_EGO,
    KIND_OBSTACLE,
    KIND_SOCIAL,
    IdmParams,
    LaneChangeProgress,
    ObstacleSpec,
    RoadConfig,
    ScenarioConfig,
    SpawnEvent,
    VehicleState,
    WorldState,
)
from .world import (
    begin_lane_change,
    detect_collisions,
    init_world,
    lane_stats,
    leading_vehicle,
    step_physics,
)
