from .actions import ACCEL_CMD, DECEL_CMD, LANE_ACTIONS, N_ACTIONS, Action, lane_direction
from .env import (
    COLLISION,
    ROAD_END,
    RUNNING,
    TIMEOUT,
    EnvContractError,
    LaneChangeEnv,
    StepResult,
)
from .observation import (
    ACCEL_NORM,
    COUNT_NORM,
    GAP_NORM_M,
    GAP_NORM_MAX,
    GAP_SENTINEL_M,
    Observation,
    build_observation,
    current_lane_gap,
    obs_dim,
)
from .rewards import (
    COLLISION_PENALTY,
    LANE_CHANGE_PENALTY,
    RewardBreakdown,
    reward_efficiency,
    reward_lane_change,
    reward_safety,
)
