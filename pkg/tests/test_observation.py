"""Observation layout, absent-leader sentinels, and normalization."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lanerlhf.mdp.observation import (
    ACCEL_NORM,
    COUNT_NORM,
    GAP_NORM_M,
    GAP_NORM_MAX,
    GAP_SENTINEL_M,
    build_observation,
    current_lane_gap,
    obs_dim,
)
from lanerlhf.sim import SpawnEvent, VehicleState, init_world

from conftest import make_scenario


def add(w, **kw):
    kw.setdefault("v_cap", 30.0)
    w.vehicles.append(VehicleState(**kw))
    return w.vehicles[-1]


class TestLayout:
    def test_dim_counts_lane_stat_pairs(self):
        assert obs_dim(2) == 15
        assert obs_dim(3) == 17
        assert obs_dim(1) == 13

    def test_ego_speed_and_accel_lead_the_vector(self, empty_scenario):
        w = init_world(empty_scenario, seed=0)
        w.ego().v = 13.5
        w.ego().a = -1.25
        obs = build_observation(w)
        assert obs.raw[0] == 13.5
        assert obs.raw[1] == -1.25

    def test_leader_slots_current_right_left(self):
        sc = make_scenario(lane_count=3, ego_lane=1)
        w = init_world(sc, seed=0)
        # ego at x=5 in lane 1; one leader per lane, distinct speeds.
        add(w, id="cur", x=40.0, lane=1, v=10.0, a=0.5)
        add(w, id="right", x=60.0, lane=2, v=11.0, a=-0.5)
        add(w, id="left", x=80.0, lane=0, v=12.0, a=1.0)
        raw = build_observation(w).raw
        assert raw[2:5].tolist() == [10.0, 0.5, 40.0 - 5.0 - 5.0]
        assert raw[5:8].tolist() == [11.0, -0.5, 60.0 - 5.0 - 5.0]
        assert raw[8:11].tolist() == [12.0, 1.0, 80.0 - 5.0 - 5.0]

    def test_vehicle_behind_is_not_a_leader(self, empty_scenario):
        w = init_world(empty_scenario, seed=0)
        w.ego().x = 200.0
        add(w, id="behind", x=150.0, lane=0, v=25.0)
        raw = build_observation(w).raw
        assert raw[2:5].tolist() == [0.0, 0.0, GAP_SENTINEL_M]

    def test_lane_stats_tail(self):
        sc = make_scenario(lane_count=2)
        w = init_world(sc, seed=0)
        add(w, id="a", x=40.0, lane=0, v=10.0)
        add(w, id="b", x=90.0, lane=1, v=20.0)
        add(w, id="c", x=50.0, lane=1, v=24.0)
        raw = build_observation(w).raw
        # lane 0 holds ego (v from spawn) plus one at 10 m/s.
        ego_v = w.ego().v
        assert raw[11] == 2.0
        assert raw[12] == pytest.approx((ego_v + 10.0) / 2.0)
        assert raw[13] == 2.0
        assert raw[14] == pytest.approx(22.0)


class TestSentinels:
    def test_absent_leader_triple(self, empty_scenario):
        raw = build_observation(init_world(empty_scenario, seed=0)).raw
        for base in (2, 5, 8):
            assert raw[base : base + 3].tolist() == [0.0, 0.0, GAP_SENTINEL_M]

    def test_offroad_lane_uses_sentinel(self):
        # Ego in the leftmost lane: the left slot has no physical lane.
        sc = make_scenario(lane_count=2, ego_lane=0)
        w = init_world(sc, seed=0)
        add(w, id="x", x=50.0, lane=1, v=9.0)
        raw = build_observation(w).raw
        assert raw[8:11].tolist() == [0.0, 0.0, GAP_SENTINEL_M]
        assert raw[5:8].tolist() == [9.0, 0.0, 50.0 - 5.0 - 5.0]

    def test_current_lane_gap_matches_slot(self, empty_scenario):
        w = init_world(empty_scenario, seed=0)
        assert current_lane_gap(w) == GAP_SENTINEL_M
        add(w, id="x", x=77.0, lane=0, v=9.0)
        assert current_lane_gap(w) == pytest.approx(77.0 - 5.0 - 5.0)
        assert current_lane_gap(w) == build_observation(w).raw[4]


class TestNormalization:
    def test_frozen_reference_vector(self):
        sc = make_scenario(lane_count=2, v_max=20.0, ego_v0=15.0)
        w = init_world(sc, seed=0)
        w.ego().a = -4.0
        add(w, id="cur", x=60.0, lane=0, v=10.0, a=2.0)
        norm = build_observation(w).normalized
        assert norm[0] == pytest.approx(0.75, abs=1e-15)
        assert norm[1] == pytest.approx(-0.5, abs=1e-15)
        assert norm[2] == pytest.approx(0.5, abs=1e-15)
        assert norm[3] == pytest.approx(0.25, abs=1e-15)
        assert norm[4] == pytest.approx(0.5, abs=1e-15)  # 50 m / 100 m
        # Empty right lane: sentinel clips at the gap ceiling.
        assert norm[7] == GAP_NORM_MAX
        # Lane stats: one vehicle at 15 m/s in lane 0.
        assert norm[11] == pytest.approx(2.0 / COUNT_NORM)
        assert norm[13] == 0.0 and norm[14] == 0.0

    def test_sentinel_clips_to_gap_ceiling(self, empty_scenario):
        norm = build_observation(init_world(empty_scenario, seed=0)).normalized
        assert norm[4] == GAP_NORM_MAX == GAP_SENTINEL_M / GAP_NORM_M

    def test_negative_gap_clips_to_zero(self, empty_scenario):
        w = init_world(empty_scenario, seed=0)
        add(w, id="x", x=12.0, lane=0, v=5.0)  # gap 12-5-5 = 2 > 0
        w.ego().x = 8.0  # now gap = -1
        norm = build_observation(w).normalized
        assert norm[4] == 0.0

    @settings(max_examples=50, deadline=None)
    @given(
        v=st.floats(0.0, 30.0),
        a=st.floats(-8.0, 2.0),
        x_lead=st.floats(11.0, 590.0),
    )
    def test_normalization_is_elementwise_scaling(self, v, a, x_lead):
        sc = make_scenario(lane_count=2, v_max=25.0)
        w = init_world(sc, seed=0)
        w.ego().v = v
        w.ego().a = a
        add(w, id="x", x=x_lead, lane=0, v=12.0)
        obs = build_observation(w)
        assert obs.normalized[0] == obs.raw[0] / 25.0
        assert obs.normalized[1] == obs.raw[1] / ACCEL_NORM
        expect_gap = min(max(obs.raw[4] / GAP_NORM_M, 0.0), GAP_NORM_MAX)
        assert obs.normalized[4] == expect_gap
        assert obs.raw.shape == obs.normalized.shape == (15,)
        assert obs.raw.dtype == np.float64
