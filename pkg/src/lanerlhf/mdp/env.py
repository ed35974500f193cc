"""Decision-level MDP wrapper around the physics simulator."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, TextIO

from ..sim import ScenarioConfig, WorldState, begin_lane_change, init_world, step_physics
from .actions import ACCEL_CMD, DECEL_CMD, LANE_ACTIONS, Action, lane_direction
from .observation import GAP_SENTINEL_M, Observation, build_observation, current_lane_gap, obs_dim
from .rewards import RewardBreakdown, reward_efficiency, reward_lane_change, reward_safety

RUNNING = "running"
COLLISION = "collision"
TIMEOUT = "timeout"
ROAD_END = "road_end"


class EnvContractError(RuntimeError):
    """Raised when the env is driven outside its contract (step after terminal)."""


@dataclass
class StepResult:
    obs: Observation
    reward: RewardBreakdown
    terminated: str  # one of RUNNING / COLLISION / TIMEOUT / ROAD_END
    info: dict = field(default_factory=dict)

    @property
    def done(self) -> bool:
        return self.terminated != RUNNING


class LaneChangeEnv:
    """One decision step = substeps_per_decision physics ticks.

    During warmup the incoming action is overridden to Keep.  Lane actions
    at the road edge or mid-maneuver are masked to Keep with no penalty.
    An optional frame_recorder receives the world after every physics tick
    (and once at reset); an optional log file receives one JSON line per
    decision step.
    """

    def __init__(
        self,
        scenario: ScenarioConfig,
        frame_recorder: Optional[Callable[[WorldState], None]] = None,
        log_file: Optional[TextIO] = None,
    ):
        self.scenario = scenario
        self.frame_recorder = frame_recorder
        self.log_file = log_file
        self.world: Optional[WorldState] = None
        self._terminated = RUNNING
        self._episode = -1
        self._decision = 0
        self._warmup_decisions = round(scenario.warmup_s / scenario.decision_dt)
        self._limit_decisions = round(scenario.episode_limit_s / scenario.decision_dt)

    @property
    def obs_dim(self) -> int:
        return obs_dim(self.scenario.road.lane_count)

    @property
    def in_warmup(self) -> bool:
        return self._decision < self._warmup_decisions

    @property
    def decision_index(self) -> int:
        return self._decision

    @property
    def t(self) -> float:
        return self._decision * self.scenario.decision_dt

    def reset(self, seed: int) -> Observation:
        self.world = init_world(self.scenario, seed)
        self._terminated = RUNNING
        self._episode += 1
        self._decision = 0
        if self.frame_recorder:
            self.frame_recorder(self.world)
        return build_observation(self.world)

    def step(self, action: Action) -> StepResult:
        if self.world is None:
            raise EnvContractError("step() before reset()")
        if self._terminated != RUNNING:
            raise EnvContractError(f"step() after terminal state ({self._terminated})")

        action = Action(action)
        w = self.world
        ego = w.ego()
        t_decision = self.t
        executed = action
        lc_accepted = False
        lc_event = None

        if self.in_warmup:
            executed = Action.KEEP
        elif action in LANE_ACTIONS:
            if ego.maneuver is not None:
                executed = Action.KEEP
            else:
                gap_before = current_lane_gap(w)
                from_lane = ego.lane
                if begin_lane_change(w, "ego", lane_direction(action)):
                    lc_accepted = True
                    lc_event = {
                        "t": t_decision,
                        "gap": gap_before,
                        "from_lane": from_lane,
                        "to_lane": ego.maneuver.target_lane,
                    }
                else:
                    executed = Action.KEEP

        cmd = None
        if executed == Action.ACCELERATE:
            cmd = ACCEL_CMD
        elif executed == Action.DECELERATE:
            cmd = DECEL_CMD

        for _ in range(self.scenario.substeps_per_decision):
            step_physics(w, ego_accel_cmd=cmd)
            if self.frame_recorder:
                self.frame_recorder(w)
        self._decision += 1

        ego = w.ego()
        collided = "ego" in w.collision_flags
        road = self.scenario.road
        reward = RewardBreakdown.combine(
            r_s=reward_safety(collided),
            r_lc=reward_lane_change(executed, lc_accepted),
            r_e=reward_efficiency(ego.v, road.v_min, road.v_max),
        )
        if collided:
            self._terminated = COLLISION
        elif ego.x >= road.length_m:
            self._terminated = ROAD_END
        elif self._decision >= self._limit_decisions:
            self._terminated = TIMEOUT

        obs = build_observation(w)
        info = {
            "t": t_decision,
            "action": int(action),
            "executed_action": int(executed),
            "gap_to_leader": current_lane_gap(w),
            "lane": ego.lane,
            "lateral_position": w.lateral_position(ego),
        }
        if lc_event:
            info["lane_change"] = lc_event
        result = StepResult(obs=obs, reward=reward, terminated=self._terminated, info=info)
        if self.log_file is not None:
            self._write_log(result)
        return result

    def _write_log(self, r: StepResult) -> None:
        rec = {
            "episode": self._episode,
            "t": r.info["t"],
            "obs_raw": [float(x) for x in r.obs.raw],
            "obs_norm": [float(x) for x in r.obs.normalized],
            "action": r.info["action"],
            "executed_action": r.info["executed_action"],
            "r_s": r.reward.r_s,
            "r_lc": r.reward.r_lc,
            "r_e": r.reward.r_e,
            "r_total": r.reward.r_total,
            "terminated": r.terminated,
            "info": {
                k: v for k, v in r.info.items() if k not in ("action", "executed_action")
            },
        }
        self.log_file.write(json.dumps(rec) + "\n")


__all__ = [
    "Action",
    "COLLISION",
    "EnvContractError",
    "GAP_SENTINEL_M",
    "LaneChangeEnv",
    "ROAD_END",
    "RUNNING",
    "StepResult",
    "TIMEOUT",
]
