"""Scenario files: JSON on disk, speeds in m/s or with an explicit unit suffix."""
from __future__ import annotations

import json
import re
from importlib import resources
from pathlib import Path
from typing import Union

from .types import IdmParams, ObstacleSpec, RoadConfig, ScenarioConfig, SpawnEvent

BUNDLED = ("obstacle", "mixed")

_SPEED_RE = re.compile(r"^\s*([0-9]*\.?[0-9]+)\s*(km/h|m/s)\s*$")


class ScenarioError(ValueError):
    """Raised for malformed or inconsistent scenario files."""


def parse_speed(value: Union[int, float, str], where: str = "") -> float:
    """A bare number is m/s; strings must carry a unit, e.g. '70 km/h'."""
    if isinstance(value, bool):
        raise ScenarioError(f"speed {value!r} invalid {where}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        m = _SPEED_RE.match(value)
        if not m:
            raise ScenarioError(
                f"speed {value!r} {where}: expected a number (m/s) or 'NN km/h' / 'NN m/s'"
            )
        num = float(m.group(1))
        return num / 3.6 if m.group(2) == "km/h" else num
    raise ScenarioError(f"speed {value!r} has unsupported type {where}")


def _spawn(d: dict, where: str, kind_default: str = "social") -> SpawnEvent:
    try:
        return SpawnEvent(
            t_spawn=float(d.get("t_spawn", 0.0)),
            lane=int(d["lane"]),
            x0=float(d["x0"]),
            v0=parse_speed(d["v0"], where),
            v_cap=parse_speed(d["v_cap"], where),
            kind=d.get("kind", kind_default),
            length_m=float(d.get("length_m", 5.0)),
            id=d.get("id"),
        )
    except KeyError as e:
        raise ScenarioError(f"{where}: missing field {e}") from None


def scenario_from_dict(data: dict, source: str = "<dict>") -> ScenarioConfig:
    try:
        road_d = data["road"]
        road = RoadConfig(
            length_m=float(road_d["length_m"]),
            lane_count=int(road_d["lane_count"]),
            lane_width_m=float(road_d["lane_width_m"]),
            v_max=parse_speed(road_d["v_max"], f"{source} road.v_max"),
            v_min=parse_speed(road_d.get("v_min", 0.0), f"{source} road.v_min"),
        )
        idm_d = data.get("idm", {})
        idm = IdmParams(
            v0=road.v_max,
            a_max=float(idm_d.get("a_max", 2.0)),
            b_comf=float(idm_d.get("b_comf", 2.0)),
            s0=float(idm_d.get("s0", 2.0)),
            t_headway=float(idm_d.get("t_headway", 1.5)),
            delta=float(idm_d.get("delta", 4.0)),
        )
        ego = _spawn(data["ego"], f"{source} ego", kind_default="ego")
        others = [
            _spawn(d, f"{source} others[{i}]") for i, d in enumerate(data.get("others", []))
        ]
        obstacles = [
            ObstacleSpec(
                x=float(d["x"]), lane=int(d["lane"]), length_m=float(d.get("length_m", 5.0))
            )
            for d in data.get("obstacles", [])
        ]
        return ScenarioConfig(
            name=str(data.get("name", Path(source).stem)),
            road=road,
            physics_dt=float(data["physics_dt"]),
            decision_dt=float(data["decision_dt"]),
            episode_limit_s=float(data["episode_limit_s"]),
            warmup_s=float(data["warmup_s"]),
            segment_len_s=float(data["segment_len_s"]),
            ego=ego,
            others=others,
            obstacles=obstacles,
            lc_duration_s=float(data.get("lc_duration_s", 1.0)),
            idm=idm,
        )
    except ScenarioError:
        raise
    except KeyError as e:
        raise ScenarioError(f"{source}: missing field {e}") from None
    except (TypeError, ValueError) as e:
        raise ScenarioError(f"{source}: {e}") from None


def load_scenario(path: Union[str, Path]) -> ScenarioConfig:
    """Load a scenario JSON file; raises ScenarioError with the cause."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ScenarioError(f"cannot read scenario {path}: {e}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"scenario {path} is not valid JSON: {e}") from None
    if not isinstance(data, dict):
        raise ScenarioError(f"scenario {path}: top level must be an object")
    return scenario_from_dict(data, source=str(path))


def resolve_scenario(name_or_path: Union[str, Path]) -> ScenarioConfig:
    """Accept a bundled scenario name ('obstacle', 'mixed') or a file path."""
    s = str(name_or_path)
    if s in BUNDLED:
        ref = resources.files("lanerlhf.sim") / "scenarios" / f"{s}.json"
        return scenario_from_dict(json.loads(ref.read_text()), source=s)
    return load_scenario(name_or_path)
