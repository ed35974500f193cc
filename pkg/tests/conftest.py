"""Shared scenario builders and the acceptance-criteria summary reporter."""
import pytest

from lanerlhf.sim import (
    IdmParams,
    ObstacleSpec,
    RoadConfig,
    ScenarioConfig,
    SpawnEvent,
)

_CRITERION_LINES: dict[int, tuple[bool, str]] = {}


def check_criterion(number: int, passed: bool, detail: str) -> None:
    """Record one acceptance-criterion outcome and assert it.

    The recorded lines are printed in the terminal summary, one per
    criterion, whether or not the assertion passed."""
    _CRITERION_LINES[number] = (bool(passed), detail)
    assert passed, f"criterion {number}: {detail}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERION_LINES):
        passed, detail = _CRITERION_LINES[number]
        word = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2}: {word}  {detail}")


def make_scenario(
    name="test",
    lane_count=2,
    length_m=600.0,
    v_max=19.444444444444443,  # 70 km/h
    ego_v0=11.11111111111111,  # 40 km/h
    ego_lane=0,
    ego_x0=5.0,
    others=(),
    obstacles=(),
    episode_limit_s=25.0,
    warmup_s=5.0,
    segment_len_s=5.0,
    physics_dt=0.1,
    decision_dt=1.0,
    idm=None,
):
    return ScenarioConfig(
        name=name,
        road=RoadConfig(
            length_m=length_m, lane_count=lane_count, lane_width_m=3.75, v_max=v_max
        ),
        physics_dt=physics_dt,
        decision_dt=decision_dt,
        episode_limit_s=episode_limit_s,
        warmup_s=warmup_s,
        segment_len_s=segment_len_s,
        ego=SpawnEvent(t_spawn=0.0, lane=ego_lane, x0=ego_x0, v0=ego_v0, v_cap=v_max, kind="ego"),
        others=list(others),
        obstacles=list(obstacles),
        idm=idm,
    )


@pytest.fixture
def obstacle_scenario():
    """Two lanes, parked vehicle at 180 m in the ego's lane."""
    return make_scenario(obstacles=[ObstacleSpec(x=180.0, lane=0)])


@pytest.fixture
def empty_scenario():
    return make_scenario()
