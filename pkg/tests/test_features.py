"""Feature extraction and buffer normalization."""

import math

import numpy as np
import pytest

from highway_irl import (Collision, NormalizationConstants, RolloutResult,
                         VehicleState, apply_normalization,
                         normalize_features, rollout, solve_lateral,
                         solve_longitudinal, step_features, synthetic,
                         trajectory_features)
from highway_irl.features import (COLLISION, FEATURE_NAMES, INTERACTION,
                                  N_FEATURES, SPEED)
from highway_irl.trajectory_gen import PolynomialPair

E_MINUS_2 = 0.1353352832366127


def straight_candidate(x0, y0, v0, v1=None, horizon=5.0):
    v1 = v0 if v1 is None else v1
    pair = PolynomialPair(lon=solve_longitudinal(x0, v0, 0.0, v1, 0.0, horizon),
                          lat=solve_lateral(y0, 0.0, 0.0, y0, 0.0, 0.0, horizon),
                          horizon=horizon)
    return pair.sample()


def fixed_rollout(road, ego, neighbors=()):
    scene = synthetic.make_scene(ego, tuple(neighbors))
    cand = straight_candidate(ego.x[0], ego.y[0], float(ego.vx[0]))
    return rollout(scene, cand, road, mode="fixed_replay")


def hand_rollout(road, ego_states, neighbor_states=None, presence=None,
                 collision=None, influenced=None):
    """Assemble a result directly so single components can be pinned."""
    n = len(ego_states)
    cand = straight_candidate(ego_states[0].x, ego_states[0].y,
                              ego_states[0].speed)
    return RolloutResult(
        candidate=cand, mode="fixed_replay", road=road,
        ego_states=ego_states, neighbor_states=neighbor_states or {},
        presence=presence or {}, override_events=[],
        collision=collision or Collision(),
        influenced_decels=influenced or [dict() for _ in range(n)])


def vstate(x, y, speed, mode="replay"):
    return VehicleState(x=x, y=y, heading=0.0, speed=speed, accel=0.0,
                        length=4.5, width=1.8, mode=mode)


# -------------------------------------------------------------- risk oracles

def test_risk_front_exact(road):
    # leader 20 m ahead center to center at matched speed 10: exp(-2)
    ego = synthetic.constant_speed_track(1, x0=50.0, speed=10.0, n=51, lane=2)
    lead = synthetic.constant_speed_track(2, x0=70.0, speed=10.0, n=51, lane=2)
    f = step_features(fixed_rollout(road, ego, [lead]), 0)
    assert f[4] == pytest.approx(E_MINUS_2, abs=1e-12)
    assert f[5] == 0.0


def test_risk_rear_uses_rear_vehicle_speed(road):
    # follower 10 m behind moving at 5 m/s: exp(-10 / 5), not exp(-10 / 10)
    ego = synthetic.constant_speed_track(1, x0=50.0, speed=10.0, n=51, lane=2)
    rear = synthetic.constant_speed_track(2, x0=40.0, speed=5.0, n=51, lane=2)
    f = step_features(fixed_rollout(road, ego, [rear]), 0)
    assert f[5] == pytest.approx(E_MINUS_2, abs=1e-12)
    assert f[4] == 0.0


def test_risk_only_nearest_leader_counts(road):
    ego = synthetic.constant_speed_track(1, x0=50.0, speed=10.0, n=51, lane=2)
    near = synthetic.constant_speed_track(2, x0=70.0, speed=10.0, n=51, lane=2)
    far = synthetic.constant_speed_track(3, x0=80.0, speed=10.0, n=51, lane=2)
    f = step_features(fixed_rollout(road, ego, [near, far]), 0)
    assert f[4] == pytest.approx(E_MINUS_2, abs=1e-12)


def test_risk_lateral_band(road):
    # a half lane width decides membership; adjacent lane does not register
    ego = synthetic.constant_speed_track(1, x0=50.0, speed=10.0, n=51, lane=2)
    beside = synthetic.constant_speed_track(2, x0=70.0, speed=10.0, n=51,
                                            lane=3)
    f = step_features(fixed_rollout(road, ego, [beside]), 0)
    assert f[4] == 0.0
    drifting = synthetic.constant_speed_track(
        2, x0=70.0, speed=10.0, n=51, y=road.lane_center(2) + 1.5)
    f = step_features(fixed_rollout(road, ego, [drifting]), 0)
    assert f[4] > 0.0


def test_risk_excludes_vehicles_past_segment_end(road):
    ego = synthetic.constant_speed_track(1, x0=625.0, speed=10.0, n=51,
                                         lane=2)
    gone = synthetic.constant_speed_track(2, x0=645.0, speed=10.0, n=51,
                                          lane=2)
    f = step_features(fixed_rollout(road, ego, [gone]), 0)
    assert f[4] == 0.0


def test_risk_absent_neighbor_ignored(road):
    late = synthetic.constant_speed_track(2, x0=90.0, speed=10.0, n=31,
                                          lane=2, t0=2.0)
    ego = synthetic.constant_speed_track(1, x0=50.0, speed=10.0, n=51, lane=2)
    result = fixed_rollout(road, ego, [late])
    assert step_features(result, 0)[4] == 0.0
    assert step_features(result, 25)[4] > 0.0


def test_risk_stopped_ego_speed_floor(road):
    # divisor bottoms out at 0.1, so 0.2 m at standstill is exp(-2)
    states = [vstate(50.0, road.lane_center(2), 0.0)]
    lead = {2: [vstate(50.2, road.lane_center(2), 10.0)]}
    result = hand_rollout(road, states, lead, {2: np.array([True])})
    f = step_features(result, 0)
    assert f[4] == pytest.approx(E_MINUS_2, abs=1e-12)


def test_risk_monotone_in_gap(road):
    y = road.lane_center(2)
    risks = []
    for gap in (10.0, 15.0, 25.0, 40.0):
        lead = {2: [vstate(50.0 + gap, y, 10.0)]}
        result = hand_rollout(road, [vstate(50.0, y, 10.0)], lead,
                              {2: np.array([True])})
        risks.append(step_features(result, 0)[4])
    assert all(a > b for a, b in zip(risks, risks[1:]))


# ------------------------------------------------- collision and interaction

def test_interaction_counts_only_decelerations(road):
    states = [vstate(50.0, road.lane_center(2), 10.0)]
    result = hand_rollout(road, states, influenced=[{1: -2.0, 2: 0.5}])
    f = step_features(result, 0)
    assert f[INTERACTION] == pytest.approx(2.0)


def test_interaction_sums_across_vehicles(road):
    states = [vstate(50.0, road.lane_center(2), 10.0)]
    result = hand_rollout(road, states, influenced=[{1: -2.0, 2: -0.25}])
    assert step_features(result, 0)[INTERACTION] == pytest.approx(2.25)


def test_collision_indicator_latched(road):
    y = road.lane_center(2)
    states = [vstate(50.0 + k, y, 10.0) for k in range(51)]
    result = hand_rollout(road, states,
                          collision=Collision(kind="vehicle", vehicle_id=2,
                                              step=30))
    assert step_features(result, 29)[COLLISION] == 0.0
    assert step_features(result, 30)[COLLISION] == 1.0
    assert step_features(result, 50)[COLLISION] == 1.0
    assert trajectory_features(result)[COLLISION] == pytest.approx(21.0)


def test_collision_indicator_in_real_rollout(road):
    parked = synthetic.constant_speed_track(2, x0=40.0, speed=0.0, n=51,
                                            lane=2)
    ego = synthetic.constant_speed_track(1, x0=10.0, speed=12.0, n=51, lane=2)
    scene = synthetic.make_scene(ego, (parked,))
    cand = straight_candidate(10.0, road.lane_center(2), 12.0)
    result = rollout(scene, cand, road)
    total = trajectory_features(result)
    assert total[COLLISION] == pytest.approx(51 - result.collision.step)


# --------------------------------------------------------- kinematic sources

def test_speed_sum_for_constant_velocity(road):
    ego = synthetic.constant_speed_track(1, x0=10.0, speed=10.0, n=51, lane=2)
    total = trajectory_features(fixed_rollout(road, ego))
    assert total[SPEED] == pytest.approx(510.0, abs=1e-9)
    assert total[1] == pytest.approx(0.0, abs=1e-9)   # accel_lon
    assert total[3] == pytest.approx(0.0, abs=1e-9)   # jerk_lon


def test_kinematics_come_from_the_polynomial(road):
    # a lane change carries lateral speed and acceleration even though the
    # longitudinal profile stays constant
    ego = synthetic.constant_speed_track(1, x0=10.0, speed=10.0, n=51, lane=2)
    scene = synthetic.make_scene(ego)
    pair = PolynomialPair(
        lon=solve_longitudinal(10.0, 10.0, 0.0, 10.0, 0.0, 5.0),
        lat=solve_lateral(road.lane_center(2), 0.0, 0.0, road.lane_center(3),
                          0.0, 0.0, 5.0),
        horizon=5.0)
    cand = pair.sample()
    result = rollout(scene, cand, road, mode="fixed_replay")
    total = trajectory_features(result)
    assert total[SPEED] > 510.0            # lateral motion adds speed
    assert total[2] > 0.0                  # accel_lat
    assert total[1] == pytest.approx(0.0, abs=1e-9)


def test_parked_ego_is_all_zero(road):
    ego = synthetic.constant_speed_track(1, x0=10.0, speed=0.0, n=51, lane=1)
    total = trajectory_features(fixed_rollout(road, ego))
    np.testing.assert_allclose(total, np.zeros(N_FEATURES), atol=1e-12)


def test_step_features_nonnegative(road, store_tracks):
    from highway_irl import generate_candidates, segment_scenes
    scene = segment_scenes(store_tracks[1], store_tracks, count=1)[0]
    for cand in generate_candidates(scene.ego_init, road)[::6]:
        result = rollout(scene, cand, road)
        for k in range(result.n_steps):
            assert (step_features(result, k) >= 0.0).all()


# --------------------------------------------------------------- scaling

def test_normalize_by_column_maximum():
    m = np.zeros((2, N_FEATURES))
    m[0, :] = 300.0
    m[1, :] = 600.0
    normed, constants = normalize_features(m)
    np.testing.assert_allclose(normed[0], np.full(N_FEATURES, 0.5))
    np.testing.assert_allclose(normed[1], np.ones(N_FEATURES))
    np.testing.assert_allclose(constants.maxima, np.full(N_FEATURES, 600.0))


def test_normalize_zero_column_passes_through():
    m = np.ones((3, N_FEATURES))
    m[:, COLLISION] = 0.0
    normed, constants = normalize_features(m)
    assert (normed[:, COLLISION] == 0.0).all()
    assert constants.divisors[COLLISION] == 1.0
    assert constants.maxima[COLLISION] == 0.0


def test_normalize_single_row():
    m = np.arange(1.0, N_FEATURES + 1.0).reshape(1, -1)
    normed, _ = normalize_features(m)
    np.testing.assert_allclose(normed, np.ones((1, N_FEATURES)))


def test_normalize_idempotent():
    rng = np.random.default_rng(3)
    m = rng.uniform(0.0, 50.0, size=(12, N_FEATURES))
    once, _ = normalize_features(m)
    twice, _ = normalize_features(once)
    np.testing.assert_allclose(twice, once)


def test_normalize_constants_row_order_independent():
    rng = np.random.default_rng(4)
    m = rng.uniform(0.0, 50.0, size=(12, N_FEATURES))
    _, c1 = normalize_features(m)
    _, c2 = normalize_features(m[::-1])
    np.testing.assert_array_equal(c1.maxima, c2.maxima)


def test_apply_normalization_external_rows():
    m = np.full((2, N_FEATURES), 10.0)
    _, constants = normalize_features(m)
    outside = apply_normalization(np.full((1, N_FEATURES), 25.0), constants)
    np.testing.assert_allclose(outside, np.full((1, N_FEATURES), 2.5))


def test_constants_round_trip_and_hash():
    rng = np.random.default_rng(5)
    maxima = rng.uniform(1.0, 100.0, size=N_FEATURES)
    c = NormalizationConstants(maxima=maxima)
    d = c.to_dict()
    assert set(d) == set(FEATURE_NAMES)
    back = NormalizationConstants.from_dict(d)
    np.testing.assert_array_equal(back.maxima, c.maxima)
    assert back.content_hash() == c.content_hash()
    bumped = maxima.copy()
    bumped[SPEED] *= 2.0
    assert NormalizationConstants(maxima=bumped).content_hash() != c.content_hash()
