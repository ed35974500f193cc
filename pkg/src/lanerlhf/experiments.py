"""End-to-end recipes for the style-shift experiments.

Every tuned choice behind the reported numbers lives in this module: the
pre-training budgets, the composition of the preference pool, the pair
quotas fed to the reward model, and the fine-tuning schedules.  The
functions are thin glue over the library stages, so a full rebuild for one
scenario and style is four calls:

    base = pretrain_base("obstacle", out_path="base.json")
    aux = pretrain_pool_policies()
    rm, info = train_style_reward_model(
        "obstacle", "aggressive", base, aux, out_path="rm.json")
    policy, meta = finetune_style(
        "obstacle", "aggressive", "base.json", "rm.json", "ft.json")

Every stage is deterministic for a fixed seed, so two rebuilds from the
same inputs produce byte-identical checkpoints.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .finetune import finetune
from .mdp import LaneChangeEnv
from .mdp.observation import obs_dim
from .ppo import PolicyNet, PpoConfig, PpoTrainer, save_policy_checkpoint
from .prefs import StyleOracle, collect_segments, sample_pairs
from .prefs.export import export_training_set
from .prefs.oracle import CHOICE_SKIP, PreferenceLabel
from .prefs.segments import TrajectorySegment
from .reward import SequencePreferenceClassifier
from .sim import resolve_scenario

# Decision steps of base pre-training per scenario (whole rollout buffers).
BASE_STEPS = {"obstacle": 20032, "mixed": 9600}

# Early snapshots of the obstacle pre-training run, used only to widen the
# preference pool: at 1920 steps the policy mostly queues behind the
# obstacle without changing lane, at 2560 it hops between lanes repeatedly.
# The converged base does neither, yet the oracle needs both behaviours on
# one side of a pair to express its taste.
POOL_KEEPER_STEPS = 1920
POOL_HOPPER_STEPS = 2560

POOL_SEED = 100
PAIR_SEED = 101
ORACLE_SEED = 7
HOLDOUT_SEED = 42

# Episode-number offset per auxiliary pool, so segment ids from different
# policies never collide and the source of a segment stays recoverable.
POOL_EPISODE_BLOCK = 100_000

# Absent-leader gaps are recorded as 1000 m; anything beyond this cutoff is
# a lane change into an empty lane rather than a measured gap.
_SENTINEL_CUTOFF_M = 900.0

# Decision steps of value-head-only training before each fine-tune: the
# value head arrives calibrated to environment returns and must re-fit to
# the learned score's scale before the policy is allowed to move.
CRITIC_WARMUP_STEPS = 2560


@dataclass(frozen=True)
class PreferenceRecipe:
    """How the labeled pairs for one (scenario, style) are put together.

    ``quotas`` caps how many labels of each kind enter training, in the
    fixed order below; ``None`` means "first ``take`` non-skipped labels".
    ``holdout`` labels are split off for accuracy reporting before fitting.
    """

    base_segments: int
    aux_segments: int
    pair_count: int
    quotas: Optional[dict[str, int]]
    take: int = 0
    holdout: int = 0


_QUOTA_ORDER = ("both_gap", "both_sentinel", "keep_base", "keep_aux")

# The aggressive quotas balance three lessons: the gap gradient from pairs
# where both sides changed lane ("both_gap"), the penalty for bailing into
# an empty lane ("both_sentinel"), and the price of never changing at all,
# taught by pairs whose losing side kept lane ("keep_base" / "keep_aux").
PREFERENCE_RECIPES = {
    ("obstacle", "conservative"): PreferenceRecipe(
        base_segments=1200, aux_segments=0, pair_count=12_000,
        quotas=None, take=1000, holdout=100),
    ("obstacle", "aggressive"): PreferenceRecipe(
        base_segments=4800, aux_segments=2400, pair_count=320_000,
        quotas={"both_gap": 1200, "both_sentinel": 600,
                "keep_base": 600, "keep_aux": 900}),
    ("mixed", "conservative"): PreferenceRecipe(
        base_segments=4800, aux_segments=0, pair_count=120_000,
        quotas=None, take=1500),
    ("mixed", "aggressive"): PreferenceRecipe(
        base_segments=4800, aux_segments=0, pair_count=120_000,
        quotas={"both_gap": 1200, "both_sentinel": 600,
                "keep_base": 1500, "keep_aux": 0}),
}

# Fine-tuning schedules.  Obstacle episodes are short, so Monte-Carlo
# returns (gae_lambda=1) are cheap and the run converges within 704 steps.
# In the mixed scenario the style payoff arrives tens of decisions after
# the actions that earn it, so the advantage must come from one-step TD
# with a strongly trained value head (critic_lr), and each update averages
# many episodes (n_steps=512) to cancel per-episode luck.
_OBSTACLE_FT = dict(total_decision_steps=704, n_steps=64, n_epochs=64,
                    gae_lambda=1.0, critic_lr=1e-2)
_MIXED_FT = dict(n_steps=512, batch_size=128, n_epochs=10,
                 gae_lambda=None, critic_lr=1e-2)
FINETUNE_SETTINGS = {
    ("obstacle", "conservative"): dict(_OBSTACLE_FT),
    ("obstacle", "aggressive"): dict(_OBSTACLE_FT),
    ("mixed", "conservative"): {**_MIXED_FT, "total_decision_steps": 46_080},
    ("mixed", "aggressive"): {**_MIXED_FT, "total_decision_steps": 12_288},
}


def pretrain_base(
    scenario_name: str,
    out_path: Optional[Union[str, Path]] = None,
    seed: int = 0,
    total_decision_steps: Optional[int] = None,
) -> PolicyNet:
    """Pre-trains a policy on environment reward with default settings."""
    scenario = resolve_scenario(scenario_name)
    total = BASE_STEPS[scenario_name] if total_decision_steps is None else total_decision_steps
    config = PpoConfig(total_decision_steps=total)
    policy = PolicyNet(obs_dim(scenario.road.lane_count), seed=seed)
    trainer = PpoTrainer(policy, config, seed=seed)
    trainer.fit(lambda: LaneChangeEnv(scenario))
    if out_path is not None:
        save_policy_checkpoint(
            out_path, policy, config=config, trained_steps=trainer.steps,
            scenario_id=scenario.name, seed_lineage={"seed": seed})
    return policy


def pretrain_pool_policies(seed: int = 0) -> list[PolicyNet]:
    """The two auxiliary obstacle policies for the preference pool, in
    block order: the lane keeper first, then the lane hopper."""
    return [
        pretrain_base("obstacle", seed=seed, total_decision_steps=steps)
        for steps in (POOL_KEEPER_STEPS, POOL_HOPPER_STEPS)
    ]


def _composition_buckets(
    labels: Sequence[PreferenceLabel],
    by_id: dict[str, TrajectorySegment],
) -> dict[str, list[PreferenceLabel]]:
    buckets: dict[str, list[PreferenceLabel]] = {k: [] for k in _QUOTA_ORDER}
    for rec in labels:
        left, right = by_id[rec.left_id], by_id[rec.right_id]
        if left.lane_change_occurred and right.lane_change_occurred:
            widest = max(left.gap_at_lane_change, right.gap_at_lane_change)
            key = "both_sentinel" if widest > _SENTINEL_CUTOFF_M else "both_gap"
        else:
            keeper = right if left.lane_change_occurred else left
            # block 1 is the lane-keeping auxiliary pool
            aux_keeper = POOL_EPISODE_BLOCK <= keeper.episode < 2 * POOL_EPISODE_BLOCK
            key = "keep_aux" if aux_keeper else "keep_base"
        buckets[key].append(rec)
    return buckets


def build_preference_data(
    scenario_name: str,
    style: str,
    base_policy: PolicyNet,
    pool_policies: Sequence[PolicyNet] = (),
) -> tuple[list[PreferenceLabel], dict[str, TrajectorySegment]]:
    """Collects the segment pool, samples pairs, labels them with the
    noise-free style oracle, and applies the recipe's composition.  Returns
    the selected labels and the segment lookup they reference."""
    recipe = PREFERENCE_RECIPES[(scenario_name, style)]
    if recipe.aux_segments and not pool_policies:
        raise ValueError(
            f"the ({scenario_name}, {style}) recipe needs auxiliary pool policies")
    scenario = resolve_scenario(scenario_name)
    segments = collect_segments(
        base_policy, scenario, count=recipe.base_segments, seed=POOL_SEED)
    if recipe.aux_segments:
        for block, aux in enumerate(pool_policies, start=1):
            segments += collect_segments(
                aux, scenario, count=recipe.aux_segments, seed=POOL_SEED,
                episode_start=block * POOL_EPISODE_BLOCK)
    by_id = {s.segment_id: s for s in segments}
    pairs = sample_pairs(list(by_id), count=recipe.pair_count, seed=PAIR_SEED)
    oracle = StyleOracle(style, noise=0.0, seed=ORACLE_SEED)
    labels = [l for l in oracle.label_pairs(pairs, by_id) if l.choice != CHOICE_SKIP]
    if recipe.quotas is None:
        return labels[:recipe.take], by_id
    buckets = _composition_buckets(labels, by_id)
    chosen = [
        rec for key in _QUOTA_ORDER for rec in buckets[key][:recipe.quotas[key]]
    ]
    return chosen, by_id


def train_style_reward_model(
    scenario_name: str,
    style: str,
    base_policy: PolicyNet,
    pool_policies: Sequence[PolicyNet] = (),
    out_path: Optional[Union[str, Path]] = None,
) -> tuple[SequencePreferenceClassifier, dict]:
    """Builds the preference data for one (scenario, style) and fits the
    reward model on it.  When the recipe reserves a holdout, the returned
    info dict reports ``holdout_accuracy`` and ``untrained_accuracy`` on
    that slice; training then uses only the remaining pairs."""
    recipe = PREFERENCE_RECIPES[(scenario_name, style)]
    chosen, by_id = build_preference_data(
        scenario_name, style, base_policy, pool_policies)
    info: dict = {"n_pairs": len(chosen)}
    classifier = SequencePreferenceClassifier(seed=0)
    if recipe.holdout:
        # Pair-held-out split: whole labeled pairs move together so the two
        # rows of a pair never straddle the train/test boundary.
        order = np.random.default_rng(HOLDOUT_SEED).permutation(len(chosen))
        test = [chosen[i] for i in order[: recipe.holdout]]
        train = [chosen[i] for i in order[recipe.holdout :]]
        X_test, y_test = export_training_set(test, by_id)
        X_train, y_train = export_training_set(train, by_id)
        blank = SequencePreferenceClassifier(seed=0)
        blank.initialize(X_test.shape[2], X_test.shape[1])
        info["untrained_accuracy"] = blank.pair_accuracy(X_test, y_test)
        classifier.fit(X_train, y_train)
        info["holdout_accuracy"] = classifier.pair_accuracy(X_test, y_test)
        info["n_train"] = len(train)
    else:
        X, y = export_training_set(chosen, by_id)
        classifier.fit(X, y)
    info["best_epoch"] = classifier.best_epoch_
    if out_path is not None:
        classifier.save(out_path, extra_meta={"style": style, "scenario": scenario_name})
    return classifier, info


def finetune_config(scenario_name: str, style: str) -> PpoConfig:
    return PpoConfig(**FINETUNE_SETTINGS[(scenario_name, style)])


def finetune_style(
    scenario_name: str,
    style: str,
    base_checkpoint: Union[str, Path],
    reward_checkpoint: Union[str, Path],
    out_path: Union[str, Path],
    seed: int = 0,
    stats_path: Optional[str] = None,
    progress: Optional[Callable[[dict], None]] = None,
) -> tuple[PolicyNet, dict]:
    """Runs the frozen-trunk fine-tune with the schedule tuned for the
    scenario.  The environment safety term stays on so the learned score
    shapes style without re-teaching collision avoidance."""
    scenario = resolve_scenario(scenario_name)
    return finetune(
        base_checkpoint, reward_checkpoint, scenario,
        finetune_config(scenario_name, style), out_path, seed=seed,
        keep_env_safety=True, critic_warmup_steps=CRITIC_WARMUP_STEPS,
        style=style, stats_path=stats_path, progress=progress)
