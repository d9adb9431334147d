import numpy as np
import pytest

from curiosym import io
from curiosym.explorer import (
    ExplorationConfig,
    active_filter,
    head_for,
    mean_entropy,
    run_exploration,
    score_candidates,
    select_curious_action,
    select_random_action,
)
from curiosym.model import EncoderConfig, ModeError, Network, TrainConfig
from curiosym.world import action_bounds, sample_actions

SMALL = EncoderConfig(hidden_width=8, hidden_layers=2)
OBJ = np.array([0.04, 0.05, 0.03, 0.0])


def test_selection_is_the_exhaustive_argmax():
    net = Network(SMALL, seed=0)
    action, scores, idx = select_curious_action(net, OBJ, np.random.default_rng(1), 300)
    cands = sample_actions(np.random.default_rng(1), 300)
    np.testing.assert_array_equal(action, cands[idx])
    # rescore one candidate at a time and scan linearly
    best, best_score = 0, -np.inf
    for i, a in enumerate(cands):
        s = mean_entropy(net.predict(OBJ, a)[1])[0]
        assert s == pytest.approx(scores[i], abs=1e-12)
        if s > best_score:
            best, best_score = i, s
    assert idx == best
    assert np.all(scores[idx] >= scores)


def test_single_candidate_is_returned():
    net = Network(SMALL, seed=0)
    action, _, idx = select_curious_action(net, OBJ, np.random.default_rng(5), 1)
    assert idx == 0
    np.testing.assert_array_equal(action, sample_actions(np.random.default_rng(5), 1)[0])


def test_ties_go_to_the_first_candidate():
    net = Network(SMALL, seed=0)
    net.params["dec.fc2.W"][:, 3:] = 0.0
    net.params["dec.fc2.b"][3:] = 0.7
    action, scores, idx = select_curious_action(net, OBJ, np.random.default_rng(2), 50)
    assert np.all(scores == scores[0])
    assert idx == 0


def test_selection_is_seeded():
    net = Network(SMALL, seed=0)
    a = select_curious_action(net, OBJ, np.random.default_rng(9), 100)[0]
    b = select_curious_action(net, OBJ, np.random.default_rng(9), 100)[0]
    np.testing.assert_array_equal(a, b)


def test_point_head_cannot_score():
    with pytest.raises(ModeError):
        score_candidates(Network(EncoderConfig(hidden_width=8, head="point")), OBJ, np.zeros((2, 12)))


def test_random_action_in_box(rng):
    lo, hi = action_bounds()
    for _ in range(100):
        a = select_random_action(rng)
        assert np.all(a >= lo) and np.all(a <= hi)


def test_active_filter_boundary():
    assert active_filter([0.004, -0.004, 0.0], 0.008)
    assert not active_filter([0.004, -0.0039, 0.0], 0.008)


def test_heads_by_strategy():
    assert head_for("curiosity") == "distribution"
    assert head_for("random") == head_for("active") == "point"


def test_config_validation():
    with pytest.raises(ValueError):
        ExplorationConfig(strategy="greedy")
    with pytest.raises(ValueError):
        ExplorationConfig(candidates=0)


def small_run(strategy, steps=70, path=None, seed=0):
    cfg = ExplorationConfig(strategy=strategy, candidates=20, total_steps=steps, retrain_interval=32, epochs_per_retrain=1)
    train = TrainConfig(batch_size=32, optimizer="adam", learning_rate=1e-3)
    return run_exploration(cfg, None, SMALL, train, seed=seed, dataset_path=path, config_hash="h")


@pytest.mark.parametrize("strategy", ["curiosity", "random", "active"])
def test_exploration_is_reproducible(strategy, tmp_path):
    a = small_run(strategy, path=tmp_path / "a.csv")
    b = small_run(strategy, path=tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    np.testing.assert_array_equal(a.train_mask, b.train_mask)
    for k in a.net.params:
        np.testing.assert_array_equal(a.net.params[k], b.net.params[k])
    assert a.net.head == head_for(strategy)


def test_dataset_file_matches_result(tmp_path):
    res = small_run("curiosity", path=tmp_path / "d.csv")
    back, h = io.read_dataset(tmp_path / "d.csv")
    assert h == "h"
    np.testing.assert_array_equal(back.rows(), res.dataset.rows())


def test_metrics_and_retrain_schedule():
    res = small_run("curiosity")
    assert [m["step"] for m in res.metrics] == list(range(1, 71))
    losses = [m["last_train_loss"] for m in res.metrics]
    # retrains after steps 32, 64 and the trailing partial interval at 70
    assert losses[30] is None and losses[31] is not None
    assert losses[63] != losses[62] and losses[69] != losses[68]
    assert all(m["selected_entropy"] >= m["mean_candidate_entropy"] for m in res.metrics)


def test_active_learning_keeps_only_large_effects():
    res = small_run("active", steps=120)
    mags = np.abs(res.dataset.effects).sum(1)
    np.testing.assert_array_equal(res.train_mask, mags >= 0.008)
    assert res.metrics[-1]["dataset_size"] == int(res.train_mask.sum())
    assert np.all(small_run("random", steps=20).train_mask)


def test_seeds_change_the_data():
    a = small_run("random", steps=10, seed=0).dataset.rows()
    b = small_run("random", steps=10, seed=1).dataset.rows()
    assert not np.array_equal(a, b)


def test_zero_steps(tmp_path):
    res = small_run("curiosity", steps=0, path=tmp_path / "z.csv")
    assert len(res.dataset) == 0 and res.metrics == []
    back, _ = io.read_dataset(tmp_path / "z.csv")
    assert len(back) == 0
