"""Run single episodes with a trained policy (shared by eval and collection)."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..mdp import COLLISION, Action, LaneChangeEnv, Observation, StepResult
from .network import PolicyNet


@dataclass
class EpisodeSummary:
    terminated: str
    env_return: float
    decisions: int
    events: list[dict] = field(default_factory=list)

    @property
    def collided(self) -> bool:
        return self.terminated == COLLISION


def play_episode(
    policy: PolicyNet,
    env: LaneChangeEnv,
    env_seed: int,
    rng: Optional[np.random.Generator] = None,
    greedy: bool = False,
    on_decision: Optional[Callable[[Observation, Action, StepResult], None]] = None,
) -> EpisodeSummary:
    """One full episode.  Warmup decisions only advance the recurrent state;
    on_decision fires for every post-warmup decision with the observation the
    policy acted on."""
    obs = env.reset(env_seed)
    state = policy.initial_state()
    total = 0.0
    decisions = 0
    events: list[dict] = []
    terminated = None
    while env.in_warmup:
        _, _, state, _ = policy.forward(obs.normalized[None, :], state)
        step = env.step(Action.KEEP)
        total += step.reward.r_total
        decisions += 1
        obs = step.obs
        if step.done:
            terminated = step.terminated
            break
    while terminated is None:
        action, _, _, state = policy.act(obs.normalized, state, rng=rng, greedy=greedy)
        step = env.step(Action(action))
        total += step.reward.r_total
        decisions += 1
        if on_decision:
            on_decision(obs, Action(action), step)
        lc = step.info.get("lane_change")
        if lc:
            events.append(lc)
        obs = step.obs
        if step.done:
            terminated = step.terminated
    return EpisodeSummary(
        terminated=terminated, env_return=total, decisions=decisions, events=events
    )
