"""Likelihood objective, gradient, training loop, and model persistence."""

import json
import math

import numpy as np
import pytest

from highway_irl import (COLLISION_WEIGHT, NumericError, RewardWeights,
                         SceneBuffer, SceneEntry, TrainConfig,
                         candidate_distribution, gradient, load_model,
                         objective, save_model, softmax, top_k_displacement,
                         train)
from highway_irl.features import COLLISION, INTERACTION, N_FEATURES
from highway_irl.synthetic import boltzmann_buffer, synthetic_reward

NO_FREEZE = np.zeros(N_FEATURES, dtype=bool)


def entry(scene_id, demo, cands):
    demo = np.asarray(demo, dtype=float)
    cands = np.asarray(cands, dtype=float)
    eps = np.zeros((len(cands), 2))
    return SceneEntry(scene_id=scene_id, demo_features=demo,
                      candidate_features=cands, candidate_endpoints=eps,
                      gt_endpoint=np.zeros(2))


def random_entry(rng, m=12):
    feats = rng.uniform(0.0, 1.0, size=(m + 1, N_FEATURES))
    return entry(f"s{rng.integers(1e6)}", feats[0], feats[1:])


# ------------------------------------------------------------------- softmax

def test_softmax_oracle():
    p = softmax(np.array([1.0, 0.0, -1.0]))
    np.testing.assert_allclose(
        p, [0.66524096, 0.24472847, 0.09003057], atol=1e-8)


def test_softmax_shift_invariant_and_stable():
    a = softmax(np.array([0.0, 1.0]))
    b = softmax(np.array([1000.0, 1001.0]))
    np.testing.assert_allclose(a, b, atol=1e-12)
    assert np.isfinite(b).all()
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = softmax(rng.normal(0.0, 10.0, size=rng.integers(2, 40)))
        assert abs(p.sum() - 1.0) < 1e-12
        assert (p >= 0.0).all()


def test_distribution_uniform_at_zero_weights():
    rng = np.random.default_rng(1)
    e = random_entry(rng, m=33)
    p = candidate_distribution(np.zeros(N_FEATURES), e)
    np.testing.assert_allclose(p, np.full(33, 1.0 / 33.0), atol=1e-15)


def test_distribution_identical_features_stay_uniform():
    rng = np.random.default_rng(2)
    row = rng.uniform(0.0, 1.0, N_FEATURES)
    e = entry("same", row, np.tile(row, (5, 1)))
    theta = rng.normal(0.0, 3.0, N_FEATURES)
    np.testing.assert_allclose(candidate_distribution(theta, e),
                               np.full(5, 0.2), atol=1e-12)


def test_distribution_concentrates_on_high_reward():
    e = entry("peak", np.zeros(N_FEATURES),
              np.vstack([np.ones(N_FEATURES), np.zeros(N_FEATURES)]))
    theta = np.full(N_FEATURES, 4.0)
    p = candidate_distribution(theta, e)
    assert p[0] > 0.999999


# ----------------------------------------------------------------- objective

def test_objective_zero_weights_counts_candidates():
    rng = np.random.default_rng(3)
    buf = SceneBuffer(entries=[random_entry(rng, m) for m in (5, 12, 33)])
    j = objective(np.zeros(N_FEATURES), buf, lam=0.01)
    expected = -(math.log(5) + math.log(12) + math.log(33))
    assert j == pytest.approx(expected, abs=1e-12)
    j_demo = objective(np.zeros(N_FEATURES), buf, lam=0.01, include_demo=True)
    expected = -(math.log(6) + math.log(13) + math.log(34))
    assert j_demo == pytest.approx(expected, abs=1e-12)


def test_two_component_oracle():
    # one scene, demo (1,0) against candidates (1,0) and (0,1), theta (1,0)
    e = entry("hand", [1.0, 0.0], [[1.0, 0.0], [0.0, 1.0]])
    theta = np.array([1.0, 0.0])
    free = np.zeros(2, dtype=bool)
    j = objective(theta, SceneBuffer(entries=[e]), lam=0.0, frozen=free)
    assert j == pytest.approx(-0.3132616875182228, abs=1e-12)
    p = candidate_distribution(theta, e)
    np.testing.assert_allclose(p, [0.73105858, 0.26894142], atol=1e-8)
    g = gradient(theta, SceneBuffer(entries=[e]), lam=0.0, frozen=free)
    np.testing.assert_allclose(g, [0.26894142, -0.26894142], atol=1e-8)


def test_regularizer_skips_frozen_components():
    rng = np.random.default_rng(4)
    buf = SceneBuffer(entries=[random_entry(rng)])
    theta = rng.normal(0.0, 1.0, N_FEATURES)
    frozen = NO_FREEZE.copy()
    frozen[COLLISION] = True
    j_all = objective(theta, buf, lam=0.5, frozen=NO_FREEZE)
    j_frozen = objective(theta, buf, lam=0.5, frozen=frozen)
    assert j_frozen - j_all == pytest.approx(0.5 * theta[COLLISION] ** 2,
                                             abs=1e-12)


def test_gradient_zero_gap_reduces_to_regularizer():
    # all rows identical: expected features equal the demonstration, so only
    # the penalty term survives
    rng = np.random.default_rng(5)
    row = rng.uniform(0.0, 1.0, N_FEATURES)
    buf = SceneBuffer(entries=[entry("flat", row, np.tile(row, (4, 1)))])
    theta = rng.normal(0.0, 1.0, N_FEATURES)
    g = gradient(theta, buf, lam=0.01)
    expected = -2.0 * 0.01 * theta
    expected[COLLISION] = 0.0
    np.testing.assert_allclose(g, expected, atol=1e-12)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(6)
    h = 1e-6
    for trial in range(10):
        buf = boltzmann_buffer(synthetic_reward(seed=trial),
                               n_scenes=4, n_candidates=8, seed=trial)
        theta = rng.normal(0.0, 1.0, N_FEATURES)
        g = gradient(theta, buf, lam=0.01, frozen=NO_FREEZE)
        fd = np.zeros(N_FEATURES)
        for i in range(N_FEATURES):
            up, dn = theta.copy(), theta.copy()
            up[i] += h
            dn[i] -= h
            fd[i] = (objective(up, buf, lam=0.01, frozen=NO_FREEZE) -
                     objective(dn, buf, lam=0.01, frozen=NO_FREEZE)) / (2 * h)
        err = np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12)
        assert err < 1e-4


def test_objective_midpoint_concavity():
    rng = np.random.default_rng(7)
    buf = boltzmann_buffer(synthetic_reward(seed=0), n_scenes=6,
                           n_candidates=10, seed=3)
    for _ in range(50):
        a = rng.normal(0.0, 2.0, N_FEATURES)
        b = rng.normal(0.0, 2.0, N_FEATURES)
        j_mid = objective((a + b) / 2.0, buf)
        j_avg = (objective(a, buf) + objective(b, buf)) / 2.0
        assert j_mid >= j_avg - 1e-9


# -------------------------------------------------------------------- train

def test_training_improves_objective():
    buf = boltzmann_buffer(synthetic_reward(seed=1), n_scenes=10, seed=11)
    _, report = train(buf, TrainConfig(epochs=60))
    assert report.objective[-1] > report.objective[0]
    assert len(report.epochs) == 61
    assert report.epochs[0] == 0 and report.epochs[-1] == 60


def test_collision_weight_never_trains():
    buf = boltzmann_buffer(synthetic_reward(seed=2), n_scenes=8, seed=5)
    weights, report = train(buf, TrainConfig(epochs=40))
    assert weights.theta[COLLISION] == COLLISION_WEIGHT
    assert report.theta_init[COLLISION] == COLLISION_WEIGHT
    assert weights.frozen[COLLISION]
    assert not weights.frozen[~np.eye(N_FEATURES, dtype=bool)[COLLISION]].any()


def test_zero_epochs_returns_initialization():
    buf = boltzmann_buffer(synthetic_reward(seed=3), n_scenes=4, seed=9)
    weights, report = train(buf, TrainConfig(epochs=0, seed=42))
    np.testing.assert_array_equal(weights.theta, report.theta_init)
    assert len(report.epochs) == 1
    rng = np.random.default_rng(42)
    expected = rng.normal(0.0, 0.05, N_FEATURES)
    expected[COLLISION] = COLLISION_WEIGHT
    np.testing.assert_array_equal(weights.theta, expected)


def test_training_reproducible_per_seed():
    buf = boltzmann_buffer(synthetic_reward(seed=4), n_scenes=6, seed=2)
    w1, r1 = train(buf, TrainConfig(epochs=30, seed=7))
    w2, r2 = train(buf, TrainConfig(epochs=30, seed=7))
    np.testing.assert_array_equal(w1.theta, w2.theta)
    np.testing.assert_array_equal(r1.objective, r2.objective)
    w3, _ = train(buf, TrainConfig(epochs=30, seed=8))
    assert not np.array_equal(w1.theta, w3.theta)


def test_ablated_interaction_weight_stays_zero():
    buf = boltzmann_buffer(synthetic_reward(seed=5), n_scenes=6, seed=4)
    weights, _ = train(buf, TrainConfig(epochs=30, ablate_interaction=True))
    assert weights.theta[INTERACTION] == 0.0
    assert weights.frozen[INTERACTION]


def test_non_finite_features_raise():
    buf = boltzmann_buffer(synthetic_reward(seed=6), n_scenes=3, seed=6)
    buf.entries[0].demo_features[0] = np.nan
    with pytest.raises(NumericError):
        train(buf, TrainConfig(epochs=5))


def test_buffer_rejects_single_candidate_scenes():
    with pytest.raises(ValueError, match="at least two"):
        SceneBuffer(entries=[entry("thin", np.zeros(N_FEATURES),
                                   np.zeros((1, N_FEATURES)))])


def test_feature_matrix_demo_rows_come_first():
    e1 = entry("a", np.full(N_FEATURES, 1.0), np.full((2, N_FEATURES), 2.0))
    e2 = entry("b", np.full(N_FEATURES, 3.0), np.full((2, N_FEATURES), 4.0))
    m = SceneBuffer(entries=[e1, e2]).feature_matrix()
    np.testing.assert_array_equal(m[:, 0], [1.0, 2.0, 2.0, 3.0, 4.0, 4.0])


def test_buffer_normalized_scales_to_unit_maxima():
    rng = np.random.default_rng(8)
    buf = SceneBuffer(entries=[random_entry(rng) for _ in range(3)])
    for e in buf.entries:
        e.demo_features *= 40.0
        e.candidate_features *= 40.0
    normed = buf.normalized()
    m = normed.feature_matrix()
    np.testing.assert_allclose(m.max(axis=0), np.ones(N_FEATURES))
    assert normed.normalization is not None
    # explicit constants reproduce the same scaling on a fresh copy
    again = buf.normalized(normed.normalization)
    np.testing.assert_allclose(again.feature_matrix(), m)


def test_ablate_feature_zeroes_one_column():
    rng = np.random.default_rng(9)
    buf = SceneBuffer(entries=[random_entry(rng) for _ in range(2)])
    out = buf.ablate_feature(INTERACTION)
    for before, after in zip(buf.entries, out.entries):
        assert after.demo_features[INTERACTION] == 0.0
        assert (after.candidate_features[:, INTERACTION] == 0.0).all()
        keep = np.arange(N_FEATURES) != INTERACTION
        np.testing.assert_array_equal(after.demo_features[keep],
                                      before.demo_features[keep])


# ------------------------------------------------------------ displacement

def test_top_k_displacement_exact_match_is_zero():
    eps = np.array([[10.0, 2.0], [3.0, 3.0]])
    assert top_k_displacement(np.array([0.9, 0.1]), eps,
                              np.array([10.0, 2.0])) == 0.0


def test_top_k_displacement_min_over_top_three():
    gt = np.zeros(2)
    eps = np.array([[4.0, 0.0], [2.5, 0.0], [7.1, 0.0]])
    probs = np.array([0.5, 0.2, 0.3])
    assert top_k_displacement(probs, eps, gt) == pytest.approx(2.5)


def test_top_k_displacement_ignores_low_probability_candidates():
    # the two nearest endpoints rank 4th and 5th, so they cannot win
    gt = np.zeros(2)
    eps = np.array([[30.0, 0.0], [20.0, 0.0], [25.0, 0.0],
                    [1.0, 0.0], [0.5, 0.0]])
    probs = np.array([0.30, 0.25, 0.23, 0.12, 0.10])
    assert top_k_displacement(probs, eps, gt) == pytest.approx(20.0)


def test_top_k_displacement_stable_tie_break():
    gt = np.zeros(2)
    eps = np.array([[5.0, 0.0], [6.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    probs = np.full(4, 0.25)
    # all tied: stable order keeps indices 0, 1, 2 in the running
    assert top_k_displacement(probs, eps, gt) == pytest.approx(1.0)


def test_top_k_displacement_small_sets_and_empty():
    gt = np.zeros(2)
    eps = np.array([[3.0, 4.0]])
    assert top_k_displacement(np.array([1.0]), eps, gt) == pytest.approx(5.0)
    with pytest.raises(ValueError):
        top_k_displacement(np.array([]), np.zeros((0, 2)), gt)


# ----------------------------------------------------------------- persist

def test_model_round_trip(tmp_path):
    buf = boltzmann_buffer(synthetic_reward(seed=7), n_scenes=5, seed=1)
    normed = buf.normalized()
    weights, _ = train(normed, TrainConfig(epochs=20))
    path = tmp_path / "model.json"
    save_model(path, weights, normed.normalization, TrainConfig(epochs=20),
               env_mode="fixed_replay", config_hash="abc123")
    doc = load_model(path)
    np.testing.assert_allclose(doc["weights"].theta, weights.theta)
    np.testing.assert_array_equal(doc["weights"].frozen, weights.frozen)
    np.testing.assert_allclose(doc["constants"].maxima,
                               normed.normalization.maxima)
    assert doc["env_mode"] == "fixed_replay"
    assert doc["config_hash"] == "abc123"
    assert doc["hyperparameters"]["epochs"] == 20
    assert doc["theta"]["collision"] == COLLISION_WEIGHT


def test_model_schema_mismatch(tmp_path):
    path = tmp_path / "model.json"
    doc = {"schema_version": 99}
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="schema version"):
        load_model(path)


def test_reward_weights_round_trip():
    rng = np.random.default_rng(10)
    theta = rng.normal(0.0, 1.0, N_FEATURES)
    frozen = NO_FREEZE.copy()
    frozen[COLLISION] = True
    w = RewardWeights(theta=theta, frozen=frozen)
    back = RewardWeights.from_dict(w.to_dict())
    np.testing.assert_allclose(back.theta, theta)
    np.testing.assert_array_equal(back.frozen, frozen)
    feats = rng.uniform(0.0, 1.0, size=(4, N_FEATURES))
    np.testing.assert_allclose(back.reward(feats), feats @ theta)


def test_train_report_csv(tmp_path):
    buf = boltzmann_buffer(synthetic_reward(seed=8), n_scenes=4, seed=0)
    _, report = train(buf, TrainConfig(epochs=15))
    path = tmp_path / "report.csv"
    report.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == ("epoch,objective,log_likelihood,feature_gap_norm,"
                        "human_likeness")
    assert len(lines) == 17
    assert lines[1].startswith("0,")
    assert float(lines[-1].split(",")[1]) == report.objective[-1]
