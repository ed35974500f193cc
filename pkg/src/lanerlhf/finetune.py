"""Preference fine-tuning: retrain a pre-trained policy against the learned
surrogate reward with its feature-extraction trunk frozen.

Only the post-LSTM layers (linear_f1, linear_f2, actor, critic) receive
updates; the input projection and LSTM stay bitwise identical to the base
checkpoint.  The per-step training reward is the surrogate margin of the
rolling observation window, optionally plus the environment's collision
penalty so fine-tuning cannot unlearn crash avoidance.

The value head arrives calibrated to the environment's reward scale, not the
surrogate's, and until it adjusts, its error varies systematically along the
episode.  Advantage normalization then turns that position-correlated error
into a fake action signal that can push the policy into a bad basin within the
first few updates.  An optional critic warmup closes the gap: for the first
``critic_warmup_steps`` decisions every parameter except the value head is
additionally frozen, so the policy's behavior stays exactly the base policy's
while the head learns the surrogate return scale.  Pair it with
``PpoConfig.critic_lr`` large enough to cover the scale shift; Adam moves a
parameter by at most ~lr per update, so a head that must travel tens of units
in a few hundred updates needs a learning rate around 1e-2, not 1e-4.
"""
from __future__ import annotations

from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .mdp import LaneChangeEnv, StepResult
from .ppo import (
    PolicyNet,
    PpoConfig,
    PpoTrainer,
    load_policy_checkpoint,
    save_policy_checkpoint,
)
from .reward.surrogate import SurrogateReward
from .sim import ScenarioConfig


class CompatibilityError(ValueError):
    """Raised when a policy and reward model disagree on the observation
    layout and fine-tuning would silently mix feature spaces."""


def verify_compat(policy: PolicyNet, surrogate: SurrogateReward, scenario: ScenarioConfig) -> None:
    from .mdp.observation import obs_dim as expected_obs_dim

    env_dim = expected_obs_dim(scenario.road.lane_count)
    if policy.obs_dim != env_dim:
        raise CompatibilityError(
            f"policy expects obs_dim={policy.obs_dim} but the environment produces {env_dim}"
        )
    if surrogate.net.obs_dim != policy.obs_dim:
        raise CompatibilityError(
            f"reward model obs_dim={surrogate.net.obs_dim} does not match policy obs_dim={policy.obs_dim}"
        )
    seg_steps = round(scenario.segment_len_s / scenario.decision_dt)
    if surrogate.window_steps != seg_steps:
        raise CompatibilityError(
            f"reward model window is {surrogate.window_steps} steps but scenario "
            f"segments span {seg_steps} decisions"
        )


class SurrogateSource:
    """Reward source for the trainer: feeds each decision's resulting
    observation into the rolling surrogate window.  Warmup decisions also
    pass through, so the window is already full at the first free decision."""

    def __init__(self, surrogate: SurrogateReward, keep_env_safety: bool = False):
        self.surrogate = surrogate
        self.keep_env_safety = keep_env_safety

    def reset(self, obs) -> None:
        self.surrogate.reset()
        self.surrogate.push(np.asarray(obs.normalized, dtype=np.float64))

    def reward(self, step: StepResult) -> float:
        r = self.surrogate.push(np.asarray(step.obs.normalized, dtype=np.float64))
        if self.keep_env_safety:
            r += step.reward.r_s
        return r


# During critic warmup everything but the value head is frozen on top of the
# usual trunk freeze, so policy behavior cannot move.
_WARMUP_EXTRA_PREFIXES = ("linear_f1.", "linear_f2.", "actor.")


def finetune(
    base_checkpoint: Union[str, Path],
    reward_checkpoint: Union[str, Path],
    scenario: ScenarioConfig,
    config: PpoConfig,
    out_path: Union[str, Path],
    seed: int = 0,
    keep_env_safety: bool = False,
    critic_warmup_steps: int = 0,
    style: Optional[str] = None,
    stats_path: Optional[str] = None,
    progress: Optional[Callable[[dict], None]] = None,
) -> tuple[PolicyNet, dict]:
    """Runs the frozen-trunk fine-tuning stage and writes the new policy
    checkpoint.  Returns the trained policy and the checkpoint meta.

    With ``critic_warmup_steps > 0``, that many decision steps first train the
    value head alone (entropy term disabled, behavior pinned to the base
    policy); the main phase then runs for ``config.total_decision_steps`` with
    a fresh optimizer and the usual trainable set.
    """
    if critic_warmup_steps < 0:
        raise ValueError("critic_warmup_steps must be >= 0")
    policy, base_meta = load_policy_checkpoint(base_checkpoint)
    surrogate = SurrogateReward.from_checkpoint(reward_checkpoint)
    verify_compat(policy, surrogate, scenario)
    policy.apply_finetune_freeze()

    source = SurrogateSource(surrogate, keep_env_safety=keep_env_safety)
    warmup_steps = 0
    if critic_warmup_steps:
        policy.params.freeze(_WARMUP_EXTRA_PREFIXES)
        warm_cfg = PpoConfig(
            **{
                **{f: getattr(config, f) for f in config.__dataclass_fields__},
                "total_decision_steps": critic_warmup_steps,
                "entropy_coef": 0.0,
            }
        )
        warm = PpoTrainer(policy, warm_cfg, seed=seed)
        warm.fit(lambda: LaneChangeEnv(scenario), reward_source=source)
        warmup_steps = warm.steps
        for name, p in policy.params.items():
            if name.startswith(_WARMUP_EXTRA_PREFIXES):
                p.frozen = False

    trainer = PpoTrainer(policy, config, seed=seed + 1 if critic_warmup_steps else seed)
    trainer.fit(
        lambda: LaneChangeEnv(scenario),
        reward_source=source,
        stats_path=stats_path,
        progress=progress,
    )

    meta = save_policy_checkpoint(
        out_path,
        policy,
        config=config,
        trained_steps=warmup_steps + trainer.steps,
        scenario_id=scenario.name,
        seed_lineage={
            "seed": seed,
            "base_checkpoint_meta": {
                "trained_steps": base_meta.get("trained_steps"),
                "scenario_id": base_meta.get("scenario_id"),
                "seed_lineage": base_meta.get("seed_lineage"),
            },
            "keep_env_safety": keep_env_safety,
            "critic_warmup_steps": warmup_steps,
        },
        extra_meta={"style": style} if style else None,
    )
    return policy, meta
