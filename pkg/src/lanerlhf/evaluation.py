"""Batch evaluation: lane-change gap distributions, collisions, lateral traces."""
from __future__ import annotations

import csv
import io
import json
import multiprocessing
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .ioutil import atomic_write_json, atomic_write_text, dumps_json
from .mdp import LaneChangeEnv
from .ppo import PolicyNet
from .ppo.rollout import play_episode
from .sim import ScenarioConfig

GAP_THRESHOLD_M = 40.0

STOCHASTIC = "stochastic"
GREEDY = "greedy"


@dataclass(frozen=True)
class LaneChangeEvent:
    episode: int
    t: float
    gap_m: float
    from_lane: int
    to_lane: int


@dataclass
class EvalReport:
    model_id: str
    scenario_id: str
    episodes: int
    seed: int
    mode: str
    threshold_m: float
    events: list[LaneChangeEvent]
    proportion_le_threshold: float
    proportion_gt_threshold: float
    collision_rate: float
    mean_episode_reward: float
    lateral_traces: list[list[tuple[float, float]]] = field(default_factory=list)


def split_at_threshold(
    gaps: list[float], threshold: float = GAP_THRESHOLD_M
) -> tuple[float, float]:
    """Proportions (<= threshold, > threshold); an exact-threshold gap counts
    in the lower bucket.  Empty input returns (0.0, 0.0)."""
    if not gaps:
        return 0.0, 0.0
    le = sum(1 for g in gaps if g <= threshold)
    return le / len(gaps), (len(gaps) - le) / len(gaps)


def _run_episode(policy, scenario, seed, episode, mode):
    env_frames: list[tuple[float, float]] = []
    env = LaneChangeEnv(
        scenario,
        frame_recorder=lambda w: env_frames.append((w.t, w.lateral_position(w.ego()))),
    )
    rng = None if mode == GREEDY else np.random.default_rng([seed, episode])
    summary = play_episode(
        policy, env, env_seed=episode, rng=rng, greedy=(mode == GREEDY)
    )
    return summary, env_frames


_POOL_CTX: dict = {}


def _pool_init(policy_values, obs_dim, width, n_actions, scenario, seed, mode):
    policy = PolicyNet(obs_dim=obs_dim, width=width, n_actions=n_actions)
    policy.params.load_values(policy_values)
    _POOL_CTX.update(policy=policy, scenario=scenario, seed=seed, mode=mode)


def _pool_episode(episode: int):
    c = _POOL_CTX
    return _run_episode(c["policy"], c["scenario"], c["seed"], episode, c["mode"])


def run_eval(
    policy: PolicyNet,
    scenario: ScenarioConfig,
    episodes: int,
    seed: int,
    mode: str = STOCHASTIC,
    model_id: str = "model",
    threshold: float = GAP_THRESHOLD_M,
    workers: int = 1,
    keep_traces: bool = True,
) -> EvalReport:
    """Evaluate over seeded episodes; results do not depend on workers.

    Episode i uses env seed i and action rng seeded by (seed, i), so any
    partitioning across processes merges to the identical report.
    """
    if mode not in (STOCHASTIC, GREEDY):
        raise ValueError(f"mode must be {STOCHASTIC!r} or {GREEDY!r}")
    if workers > 1:
        with multiprocessing.Pool(
            workers,
            initializer=_pool_init,
            initargs=(
                policy.params.values_dict(),
                policy.obs_dim,
                policy.width,
                policy.n_actions,
                scenario,
                seed,
                mode,
            ),
        ) as pool:
            results = pool.map(_pool_episode, range(episodes))
    else:
        results = [_run_episode(policy, scenario, seed, i, mode) for i in range(episodes)]

    events: list[LaneChangeEvent] = []
    traces: list[list[tuple[float, float]]] = []
    collisions = 0
    returns = []
    for i, (summary, frames) in enumerate(results):
        for ev in summary.events:
            events.append(
                LaneChangeEvent(
                    episode=i,
                    t=ev["t"],
                    gap_m=ev["gap"],
                    from_lane=ev["from_lane"],
                    to_lane=ev["to_lane"],
                )
            )
        collisions += summary.collided
        returns.append(summary.env_return)
        if keep_traces:
            traces.append(frames)
    p_le, p_gt = split_at_threshold([e.gap_m for e in events], threshold)
    return EvalReport(
        model_id=model_id,
        scenario_id=scenario.name,
        episodes=episodes,
        seed=seed,
        mode=mode,
        threshold_m=threshold,
        events=events,
        proportion_le_threshold=p_le,
        proportion_gt_threshold=p_gt,
        collision_rate=collisions / episodes if episodes else 0.0,
        mean_episode_reward=float(np.mean(returns)) if returns else 0.0,
        lateral_traces=traces,
    )


def first_lane_change_times(report: EvalReport) -> dict[int, float]:
    """Episode -> time of its first lane-change decision."""
    out: dict[int, float] = {}
    for ev in report.events:
        if ev.episode not in out or ev.t < out[ev.episode]:
            out[ev.episode] = ev.t
    return out


def compare_models(base: EvalReport, variant: EvalReport) -> dict:
    """Bucket shifts of the variant relative to the base.

    Percentage-point deltas of the bucket proportions plus relative count
    increases (n_variant - n_base) / n_base; the relative value is None when
    the base bucket is empty.  Refuses mismatched scenarios or thresholds.
    """
    if base.scenario_id != variant.scenario_id:
        raise ValueError(
            f"cannot compare across scenarios: {base.scenario_id!r} vs {variant.scenario_id!r}"
        )
    if base.threshold_m != variant.threshold_m:
        raise ValueError("cannot compare reports with different thresholds")

    def buckets(r: EvalReport) -> tuple[int, int]:
        le = sum(1 for e in r.events if e.gap_m <= r.threshold_m)
        return le, len(r.events) - le

    b_le, b_gt = buckets(base)
    v_le, v_gt = buckets(variant)

    def rel(n_new: int, n_old: int):
        return None if n_old == 0 else (n_new - n_old) / n_old

    return {
        "scenario_id": base.scenario_id,
        "base_model": base.model_id,
        "variant_model": variant.model_id,
        "threshold_m": base.threshold_m,
        "le_threshold": {
            "base_count": b_le,
            "variant_count": v_le,
            "pp_delta": (variant.proportion_le_threshold - base.proportion_le_threshold) * 100.0,
            "relative_count_increase": rel(v_le, b_le),
        },
        "gt_threshold": {
            "base_count": b_gt,
            "variant_count": v_gt,
            "pp_delta": (variant.proportion_gt_threshold - base.proportion_gt_threshold) * 100.0,
            "relative_count_increase": rel(v_gt, b_gt),
        },
        "collision_rate_delta": variant.collision_rate - base.collision_rate,
    }


def report_to_dict(report: EvalReport, round_traces: int = 3) -> dict:
    d = asdict(report)
    d["events"] = [asdict(e) for e in report.events]
    d["lateral_traces"] = [
        [[round(t, round_traces), round(y, round_traces)] for t, y in trace]
        for trace in report.lateral_traces
    ]
    return d


def report_from_dict(d: dict) -> EvalReport:
    events = [LaneChangeEvent(**e) for e in d["events"]]
    traces = [[(t, y) for t, y in trace] for trace in d.get("lateral_traces", [])]
    return EvalReport(
        model_id=d["model_id"],
        scenario_id=d["scenario_id"],
        episodes=d["episodes"],
        seed=d["seed"],
        mode=d["mode"],
        threshold_m=d["threshold_m"],
        events=events,
        proportion_le_threshold=d["proportion_le_threshold"],
        proportion_gt_threshold=d["proportion_gt_threshold"],
        collision_rate=d["collision_rate"],
        mean_episode_reward=d["mean_episode_reward"],
        lateral_traces=traces,
    )


def load_report(path: Union[str, Path]) -> EvalReport:
    with open(path) as f:
        return report_from_dict(json.load(f))


def export_report(report: EvalReport, path: Union[str, Path], fmt: str = "json") -> list[Path]:
    """Write the report; JSON is one document, CSV is three files
    (<stem>_summary.csv, <stem>_events.csv, <stem>_traces.csv)."""
    path = Path(path)
    if fmt == "json":
        atomic_write_json(path, report_to_dict(report))
        return [path]
    if fmt != "csv":
        raise ValueError(f"unsupported format {fmt!r}")
    stem = path.with_suffix("")
    summary_p = stem.with_name(stem.name + "_summary.csv")
    events_p = stem.with_name(stem.name + "_events.csv")
    traces_p = stem.with_name(stem.name + "_traces.csv")
    lines = _csv_lines(
        ["key", "value"],
        [
            ["model_id", report.model_id],
            ["scenario_id", report.scenario_id],
            ["episodes", report.episodes],
            ["seed", report.seed],
            ["mode", report.mode],
            ["threshold_m", report.threshold_m],
            ["n_events", len(report.events)],
            ["proportion_le_threshold", report.proportion_le_threshold],
            ["proportion_gt_threshold", report.proportion_gt_threshold],
            ["collision_rate", report.collision_rate],
            ["mean_episode_reward", report.mean_episode_reward],
        ],
    )
    atomic_write_text(summary_p, lines)
    lines = _csv_lines(
        ["episode", "t", "gap_m", "from_lane", "to_lane"],
        [[e.episode, e.t, e.gap_m, e.from_lane, e.to_lane] for e in report.events],
    )
    atomic_write_text(events_p, lines)
    rows = []
    for i, trace in enumerate(report.lateral_traces):
        rows.extend([i, round(t, 3), round(y, 3)] for t, y in trace)
    atomic_write_text(traces_p, _csv_lines(["episode", "t", "lateral_position_m"], rows))
    return [summary_p, events_p, traces_p]


def _csv_lines(header: list, rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()
