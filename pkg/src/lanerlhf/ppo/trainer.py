"""PPO with a clipped surrogate objective over rollout minibatches."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ..mdp import COLLISION, Action, LaneChangeEnv, StepResult
from ..nn import AdamState, adam_step, categorical_entropy, log_softmax
from .buffer import RolloutBuffer, compute_advantages
from .network import PolicyNet, sample_categorical


@dataclass
class PpoConfig:
    batch_size: int = 64
    n_steps: int = 64
    n_epochs: int = 64
    lr: float = 1e-4
    clip_epsilon: float = 0.2
    gamma: float = 0.99
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    total_decision_steps: int = 100_000
    gae_lambda: Optional[float] = None  # None = one-step TD advantages
    critic_lr: Optional[float] = None  # None = use lr for the value head too

    def __post_init__(self):
        if self.batch_size < 1 or self.n_steps < 1 or self.n_epochs < 1:
            raise ValueError("batch_size, n_steps, n_epochs must be >= 1")
        if self.batch_size > self.n_steps:
            raise ValueError("batch_size cannot exceed n_steps")
        if not 0 < self.clip_epsilon:
            raise ValueError("clip_epsilon must be positive")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")
        if self.total_decision_steps < 0:
            raise ValueError("total_decision_steps must be >= 0")
        if self.gae_lambda is not None and not 0 <= self.gae_lambda <= 1:
            raise ValueError("gae_lambda must be in [0, 1]")
        if self.critic_lr is not None and self.critic_lr <= 0:
            raise ValueError("critic_lr must be positive")


class TrainingDiverged(RuntimeError):
    """Raised when a loss goes non-finite; carries the dump file path."""

    def __init__(self, message: str, dump_path: Optional[str] = None):
        super().__init__(message)
        self.dump_path = dump_path


class EnvRewardSource:
    """Default source: the environment's summed reward terms."""

    def reset(self, obs) -> None:
        pass

    def reward(self, step: StepResult) -> float:
        return step.reward.r_total


def clipped_surrogate(ratio: np.ndarray, adv: np.ndarray, eps: float) -> np.ndarray:
    """Per-sample min(ratio * adv, clip(ratio, 1-eps, 1+eps) * adv)."""
    return np.minimum(ratio * adv, np.clip(ratio, 1.0 - eps, 1.0 + eps) * adv)


def ppo_clip_loss(
    policy: PolicyNet,
    batch: dict,
    clip_epsilon: float,
    value_coef: float,
    entropy_coef: float,
) -> tuple[float, dict]:
    """Clipped-surrogate loss with value and entropy terms; accumulates grads.

        loss = -mean(min(r*A, clip(r)*A)) + value_coef * mean((V - G)^2)
               - entropy_coef * mean(H)

    The caller is responsible for zeroing grads beforehand.  On the branch
    tie r = 1 the unclipped branch is chosen, so at theta = theta_old the
    gradient reduces to the plain policy-gradient direction.
    """
    obs = batch["obs"]
    state = (batch["h"], batch["c"])
    actions = batch["actions"]
    old_lp = batch["old_log_probs"]
    adv = batch["advantages"]
    returns = batch["returns"]
    B = obs.shape[0]

    logits, values, _, cache = policy.forward(obs, state)
    lp_all = log_softmax(logits)
    rows = np.arange(B)
    lp = lp_all[rows, actions]
    ratio = np.exp(lp - old_lp)
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon) * adv
    surr = np.minimum(unclipped, clipped)
    policy_loss = -float(surr.mean())

    value_err = values - returns
    value_loss = float(np.mean(value_err**2))
    entropy, dent_dlogits = categorical_entropy(logits)
    mean_entropy = float(entropy.mean())
    total = policy_loss + value_coef * value_loss - entropy_coef * mean_entropy

    # d(policy_loss)/d lp: active only where the selected branch depends on
    # the ratio (unclipped chosen on ties, or clip still in its linear zone).
    use_unclipped = unclipped <= clipped
    inside = (ratio >= 1.0 - clip_epsilon) & (ratio <= 1.0 + clip_epsilon)
    coeff = np.where(use_unclipped | inside, ratio * adv, 0.0)
    dlp = -coeff / B
    p_all = np.exp(lp_all)
    dlogits = -p_all * dlp[:, None]
    dlogits[rows, actions] += dlp
    dlogits -= entropy_coef * dent_dlogits / B
    dvalues = value_coef * 2.0 * value_err / B
    policy.backward(cache, dlogits, dvalues)

    clip_fraction = float(np.mean(np.abs(ratio - 1.0) > clip_epsilon))
    stats = {
        "loss": float(total),
        "policy_loss": policy_loss,
        "value_loss": value_loss,
        "entropy": mean_entropy,
        "clip_fraction": clip_fraction,
    }
    return float(total), stats


class PpoTrainer:
    """Collects fixed-length rollouts and runs clipped-surrogate updates.

    Warmup decisions are fed through the policy so the recurrent state is
    in sync, but they are executed as Keep by the env and never buffered.
    """

    def __init__(self, policy: PolicyNet, config: PpoConfig, seed: int = 0):
        self.policy = policy
        self.config = config
        self.seed = seed
        overrides = {"critic.": config.critic_lr} if config.critic_lr is not None else None
        self.adam = AdamState(lr=config.lr, lr_overrides=overrides)
        self.stats: list[dict] = []
        self.episodes = 0
        self.steps = 0

    def get_params(self) -> dict:
        return {"seed": self.seed, **asdict(self.config)}

    def fit(
        self,
        env_factory: Callable[[], LaneChangeEnv],
        reward_source=None,
        stats_path: Optional[str] = None,
        progress: Optional[Callable[[dict], None]] = None,
    ) -> "PpoTrainer":
        """Train until total_decision_steps buffered steps have been used."""
        cfg = self.config
        source = reward_source if reward_source is not None else EnvRewardSource()
        env = env_factory()
        buf = RolloutBuffer(cfg.n_steps, env.obs_dim, self.policy.width)
        rng = np.random.default_rng(self.seed)
        stats_file = open(stats_path, "w") if stats_path else None

        obs = None
        state = None
        ep_env_return = 0.0
        need_reset = True
        iteration = 0
        try:
            while self.steps < cfg.total_decision_steps:
                buf.reset()
                it_episodes = 0
                it_collisions = 0
                it_env_returns: list[float] = []
                it_gaps: list[float] = []
                while not buf.full:
                    if need_reset:
                        obs = env.reset(self.episodes)
                        state = self.policy.initial_state()
                        source.reset(obs)
                        ep_env_return = 0.0
                        need_reset = False
                        while env.in_warmup:
                            _, _, state, _ = self.policy.forward(obs.normalized[None, :], state)
                            step = env.step(Action.KEEP)
                            source.reward(step)
                            ep_env_return += step.reward.r_total
                            obs = step.obs
                            if step.done:  # episode ended before any free decision
                                self.episodes += 1
                                need_reset = True
                                break
                        if need_reset:
                            continue
                    h, c = state
                    logits, values, new_state, _ = self.policy.forward(obs.normalized[None, :], state)
                    action = sample_categorical(logits[0], rng)
                    log_prob = float(log_softmax(logits)[0, action])
                    step = env.step(Action(action))
                    r = source.reward(step)
                    buf.add(obs.normalized, h[0], c[0], action, log_prob, float(values[0]), r, step.done)
                    ep_env_return += step.reward.r_total
                    lc = step.info.get("lane_change")
                    if lc:
                        it_gaps.append(lc["gap"])
                    obs = step.obs
                    state = new_state
                    if step.done:
                        self.episodes += 1
                        it_episodes += 1
                        it_collisions += step.terminated == COLLISION
                        it_env_returns.append(ep_env_return)
                        need_reset = True
                self.steps += buf.pos

                if buf.terminals[buf.pos - 1]:
                    bootstrap = 0.0
                else:
                    _, bv, _, _ = self.policy.forward(obs.normalized[None, :], state)
                    bootstrap = float(bv[0])
                advantages, returns = compute_advantages(
                    buf.rewards, buf.values, buf.terminals, cfg.gamma, bootstrap, cfg.gae_lambda
                )

                update_stats = self._update(buf, advantages, returns, rng, iteration)
                record = {
                    "iteration": iteration,
                    "steps": self.steps,
                    "episodes": self.episodes,
                    "mean_step_reward": float(buf.rewards.mean()),
                    "lane_changes": len(it_gaps),
                    **update_stats,
                }
                if it_gaps:
                    gaps = np.asarray(it_gaps)
                    record["mean_lane_change_gap"] = float(gaps.mean())
                    record["share_gap_le_40"] = float(np.mean(gaps <= 40.0))
                if isinstance(source, EnvRewardSource) and it_episodes:
                    record["episodes_in_iter"] = it_episodes
                    record["mean_episode_reward"] = float(np.mean(it_env_returns))
                    record["collision_rate"] = it_collisions / it_episodes
                self.stats.append(record)
                if stats_file:
                    stats_file.write(json.dumps(record) + "\n")
                if progress:
                    progress(record)
                iteration += 1
        finally:
            if stats_file:
                stats_file.close()
        return self

    def _update(
        self,
        buf: RolloutBuffer,
        advantages: np.ndarray,
        returns: np.ndarray,
        rng: np.random.Generator,
        iteration: int,
    ) -> dict:
        cfg = self.config
        n = buf.pos
        agg: dict[str, float] = {}
        count = 0
        for _ in range(cfg.n_epochs):
            order = rng.permutation(n)
            for start in range(0, n, cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                adv = advantages[idx]
                # Per-minibatch advantage normalization.
                adv = (adv - adv.mean()) / (adv.std() + 1e-8)
                batch = {
                    "obs": buf.obs[idx],
                    "h": buf.h[idx],
                    "c": buf.c[idx],
                    "actions": buf.actions[idx],
                    "old_log_probs": buf.log_probs[idx],
                    "advantages": adv,
                    "returns": returns[idx],
                }
                self.policy.params.zero_grads()
                loss, stats = ppo_clip_loss(
                    self.policy, batch, cfg.clip_epsilon, cfg.value_coef, cfg.entropy_coef
                )
                if not np.isfinite(loss):
                    path = self._dump_batch(batch, iteration)
                    raise TrainingDiverged(
                        f"non-finite loss at iteration {iteration}; batch dumped to {path}",
                        dump_path=path,
                    )
                stats["grad_norm"] = self.policy.params.clip_grad_norm(cfg.max_grad_norm)
                adam_step(self.policy.params, self.adam)
                for k, v in stats.items():
                    agg[k] = agg.get(k, 0.0) + v
                count += 1
        return {k: v / count for k, v in agg.items()}

    def _dump_batch(self, batch: dict, iteration: int) -> str:
        path = Path(f"ppo-diverged-batch-iter{iteration}.json").absolute()
        doc = {k: np.asarray(v).tolist() for k, v in batch.items()}
        path.write_text(json.dumps(doc))
        return str(path)
