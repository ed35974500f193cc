"""Trajectory segments: fixed-length windows cut from policy rollouts.

A segment stores the decision-step series the reward model consumes, the
physics-rate replay frames the annotation UI animates, and derived labeling
features (lane-change occurrence, gap at the change, collision)."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Union

import numpy as np

from ..ioutil import atomic_write_json, dumps_json
from ..mdp import COLLISION, Action, LaneChangeEnv, Observation, StepResult
from ..ppo import PolicyNet
from ..ppo.rollout import play_episode
from ..sim import ScenarioConfig, WorldState


@dataclass
class DecisionEntry:
    t: float
    obs_raw: list[float]
    obs_norm: list[float]
    action: int  # executed action
    lane_change_gap: Optional[float] = None  # set when a lane change was accepted


@dataclass
class Frame:
    t: float
    vehicles: list[list]  # [id, kind, lane, x, lateral_position, v]


@dataclass
class TrajectorySegment:
    segment_id: str
    scenario_id: str
    episode: int
    start_t: float
    duration_s: float
    decision_dt: float
    physics_dt: float
    steps: list[DecisionEntry]
    frames: list[Frame]
    lane_change_occurred: bool
    gap_at_lane_change: Optional[float]
    collision_in_segment: bool

    def obs_series(self) -> np.ndarray:
        """(T, obs_dim) normalized observation series."""
        return np.asarray([s.obs_norm for s in self.steps], dtype=np.float64)


def segment_from_dict(d: dict) -> TrajectorySegment:
    return TrajectorySegment(
        segment_id=d["segment_id"],
        scenario_id=d["scenario_id"],
        episode=d["episode"],
        start_t=d["start_t"],
        duration_s=d["duration_s"],
        decision_dt=d["decision_dt"],
        physics_dt=d["physics_dt"],
        steps=[DecisionEntry(**s) for s in d["steps"]],
        frames=[Frame(**f) for f in d["frames"]],
        lane_change_occurred=d["lane_change_occurred"],
        gap_at_lane_change=d["gap_at_lane_change"],
        collision_in_segment=d["collision_in_segment"],
    )


def _frame_row(w: WorldState, veh) -> list:
    return [
        veh.id,
        veh.kind,
        veh.lane,
        round(veh.x, 3),
        round(w.lateral_position(veh), 3),
        round(veh.v, 3),
    ]


def collect_segments(
    policy: PolicyNet,
    scenario: ScenarioConfig,
    count: int,
    seed: int,
    episode_start: int = 0,
) -> list[TrajectorySegment]:
    """Roll episodes with the stochastic policy and slice non-overlapping
    windows of segment_len_s, starting after warmup.  Only complete windows
    are kept; collection stops once count segments exist.

    episode_start offsets the episode numbering (and with it the per-episode
    seeds and segment ids), so several collection runs, possibly from
    different checkpoints, can land in one store without id collisions.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if episode_start < 0:
        raise ValueError("episode_start must be >= 0")
    segments: list[TrajectorySegment] = []
    episode = episode_start
    steps_per_seg = round(scenario.segment_len_s / scenario.decision_dt)
    while len(segments) < count:
        frames: list[Frame] = []
        entries: list[DecisionEntry] = []
        collision_t: Optional[float] = None

        env = LaneChangeEnv(
            scenario,
            frame_recorder=lambda w: frames.append(
                Frame(t=round(w.t, 6), vehicles=[_frame_row(w, v) for v in w.vehicles])
            ),
        )

        def on_decision(obs: Observation, action: Action, step: StepResult):
            lc = step.info.get("lane_change")
            entries.append(
                DecisionEntry(
                    t=step.info["t"],
                    obs_raw=[float(x) for x in obs.raw],
                    obs_norm=[float(x) for x in obs.normalized],
                    action=step.info["executed_action"],
                    lane_change_gap=lc["gap"] if lc else None,
                )
            )

        rng = np.random.default_rng([seed, episode])
        summary = play_episode(
            policy, env, env_seed=episode, rng=rng, on_decision=on_decision
        )
        if summary.collided:
            collision_t = entries[-1].t if entries else 0.0

        w0 = scenario.warmup_s
        window = 0
        while True:
            start = w0 + window * scenario.segment_len_s
            end = start + scenario.segment_len_s
            if end > scenario.episode_limit_s + 1e-9:
                break
            steps = [e for e in entries if start - 1e-9 <= e.t < end - 1e-9]
            if len(steps) < steps_per_seg:
                break  # episode ended inside this window
            seg_frames = [
                f for f in frames if start - 1e-9 <= f.t < end - 1e-9
            ]
            gaps = [e.lane_change_gap for e in steps if e.lane_change_gap is not None]
            segments.append(
                TrajectorySegment(
                    segment_id=f"ep{episode:05d}-w{window}",
                    scenario_id=scenario.name,
                    episode=episode,
                    start_t=start,
                    duration_s=scenario.segment_len_s,
                    decision_dt=scenario.decision_dt,
                    physics_dt=scenario.physics_dt,
                    steps=steps,
                    frames=seg_frames,
                    lane_change_occurred=bool(gaps),
                    gap_at_lane_change=min(gaps) if gaps else None,
                    collision_in_segment=collision_t is not None
                    and start - 1e-9 <= collision_t < end - 1e-9,
                )
            )
            if len(segments) >= count:
                break
            window += 1
        episode += 1
    return segments


class SegmentStore:
    """Directory store: segments.jsonl plus an index with byte offsets,
    pairs.jsonl, and an append-only labels.jsonl."""

    INDEX = "index.json"
    SEGMENTS = "segments.jsonl"
    PAIRS = "pairs.jsonl"
    LABELS = "labels.jsonl"

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    # -- writing ----------------------------------------------------------
    def write_segments(
        self,
        segments: list[TrajectorySegment],
        provenance: dict,
        road: Optional[dict] = None,
    ) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        offsets: dict[str, int] = {}
        pos = 0
        lines = []
        for seg in segments:
            line = dumps_json(asdict(seg)) + "\n"
            offsets[seg.segment_id] = pos
            pos += len(line.encode())
            lines.append(line)
        (self.root / self.SEGMENTS).write_text("".join(lines))
        scenario_id = segments[0].scenario_id if segments else None
        atomic_write_json(
            self.root / self.INDEX,
            {
                "scenario_id": scenario_id,
                "segment_count": len(segments),
                "segment_file": self.SEGMENTS,
                "offsets": offsets,
                "road": road,
                "provenance": provenance,
            },
        )

    def write_pairs(self, pairs: list[dict]) -> None:
        (self.root / self.PAIRS).write_text(
            "".join(dumps_json(p) + "\n" for p in pairs)
        )

    def append_label(self, record: dict) -> None:
        with open(self.root / self.LABELS, "a") as f:
            f.write(dumps_json(record) + "\n")

    def write_labels(self, records: list[dict]) -> None:
        (self.root / self.LABELS).write_text(
            "".join(dumps_json(r) + "\n" for r in records)
        )

    # -- reading ----------------------------------------------------------
    @property
    def index(self) -> dict:
        return json.loads((self.root / self.INDEX).read_text())

    def segment_ids(self) -> list[str]:
        return list(self.index["offsets"])

    def get_segment(self, segment_id: str) -> dict:
        offsets = self.index["offsets"]
        if segment_id not in offsets:
            raise KeyError(f"no segment {segment_id!r} in store {self.root}")
        with open(self.root / self.SEGMENTS, "rb") as f:
            f.seek(offsets[segment_id])
            return json.loads(f.readline().decode())

    def iter_segments(self) -> Iterator[dict]:
        with open(self.root / self.SEGMENTS) as f:
            for line in f:
                yield json.loads(line)

    def load_segments(self) -> dict[str, TrajectorySegment]:
        """All segments as objects keyed by id (oracle labeling, export)."""
        return {d["segment_id"]: segment_from_dict(d) for d in self.iter_segments()}

    def pairs(self) -> list[dict]:
        p = self.root / self.PAIRS
        if not p.exists():
            return []
        return [json.loads(line) for line in p.read_text().splitlines() if line]

    def labels(self) -> list[dict]:
        p = self.root / self.LABELS
        if not p.exists():
            return []
        return [json.loads(line) for line in p.read_text().splitlines() if line]


def replay_document(store: SegmentStore, segment_id: str, road: Optional[dict] = None) -> dict:
    """Physics-rate replay for UI animation: road geometry, frames, ego id."""
    seg = store.get_segment(segment_id)
    doc = {
        "segment_id": seg["segment_id"],
        "scenario_id": seg["scenario_id"],
        "start_t": seg["start_t"],
        "duration_s": seg["duration_s"],
        "physics_dt": seg["physics_dt"],
        "ego_id": "ego",
        "frames": seg["frames"],
        "meta": {
            "lane_change_occurred": seg["lane_change_occurred"],
            "gap_at_lane_change": seg["gap_at_lane_change"],
            "collision_in_segment": seg["collision_in_segment"],
        },
    }
    if road:
        doc["road"] = road
    return doc
