"""
Tests for the short-horizon actor-critic trainer and the shared training loop.
"""
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from gradnav.diffcore import Tensor
from gradnav.models.rollout import RolloutWindow
from gradnav.services.trainers import (
    GradNavTrainer,
    NonFiniteLossError,
    compute_td_lambda,
    make_trainer,
    policy_loss,
    spawn_seeds,
)
from gradnav.utils.io import read_csv


def _window(rewards, dones, terminated):
    window = RolloutWindow()
    for t, r in enumerate(rewards):
        window.rewards.append(Tensor(np.asarray(r, dtype=np.float64), requires_grad=(t == 0)))
        window.dones.append(np.asarray(dones[t]))
        window.terminated.append(np.asarray(terminated[t]))
        window.next_priv.append(Tensor(np.zeros((len(r), 3))))
        window.next_z.append(np.zeros((len(r), 2)))
    return window


def _constant_critic(value):
    return lambda s, z: Tensor(np.full(s.shape[0], value))


def test_policy_loss_without_critic():
    """Test the normalized negative discounted window return."""
    window = _window([[1.0, 2.0], [3.0, 4.0]], [[False, False], [False, False]], [[False, False], [False, False]])
    loss = policy_loss(window, None, gamma=0.5)
    assert loss.item() == pytest.approx(-(2.5 + 4.0) / 4.0)


def test_policy_loss_restarts_discount_after_episode_end():
    """Test terminal bootstraps and the discount restart inside a window."""
    dones = [[False, True], [False, False]]
    window = _window([[1.0, 2.0], [3.0, 4.0]], dones, dones)
    loss = policy_loss(window, _constant_critic(10.0), gamma=0.5)
    # row 0: 1 + 0.5 * 3 + 0.25 * 10; row 1: 2 (terminated) then 4 + 0.5 * 10
    assert loss.item() == pytest.approx(-(5.0 + 2.0 + 9.0) / 4.0)
    loss.backward()
    np.testing.assert_allclose(window.rewards[0].grad, [-0.25, -0.25])


def test_policy_loss_truncated_rows_bootstrap():
    """Test that a truncated row bootstraps from the critic at its end."""
    window = _window([[1.0], [1.0]], [[True], [False]], [[False], [False]])
    loss = policy_loss(window, _constant_critic(2.0), gamma=0.5)
    assert loss.item() == pytest.approx(-((1.0 + 1.0) + (1.0 + 1.0)) / 2.0)


def test_policy_loss_requires_graph():
    """Test that a window without a tape is refused."""
    window = RolloutWindow()
    window.rewards.append(Tensor(np.zeros(2)))
    window.dones.append(np.zeros(2, dtype=bool))
    with pytest.raises(ValueError):
        policy_loss(window, None, 0.99)


def test_td_lambda_extremes():
    """Test TD(0) and Monte Carlo targets as the lambda extremes."""
    rewards = np.array([[1.0], [2.0], [3.0]])
    next_values = np.array([[10.0], [20.0], [30.0]])
    dones = np.zeros((3, 1), dtype=bool)
    td0 = compute_td_lambda(rewards, next_values, dones, gamma=0.5, lam=0.0)
    np.testing.assert_allclose(td0[:, 0], [6.0, 12.0, 18.0])
    mc = compute_td_lambda(rewards, next_values, dones, gamma=0.5, lam=1.0)
    np.testing.assert_allclose(mc[:, 0], [1.0 + 0.5 * 2.0 + 0.25 * 3.0 + 0.125 * 30.0, 2.0 + 0.5 * 3.0 + 0.25 * 30.0, 18.0])


def test_td_lambda_stops_at_episode_end():
    """Test that a finished row bootstraps from its own terminal value only."""
    rewards = np.array([[1.0], [2.0]])
    next_values = np.array([[0.0], [5.0]])
    dones = np.array([[True], [False]])
    targets = compute_td_lambda(rewards, next_values, dones, gamma=0.9, lam=0.95)
    np.testing.assert_allclose(targets[:, 0], [1.0, 2.0 + 0.9 * 5.0])


def test_spawn_seeds_are_reproducible_and_distinct():
    """Test child seed derivation."""
    assert spawn_seeds(7, 3) == spawn_seeds(7, 3)
    assert len(set(spawn_seeds(7, 3))) == 3
    assert spawn_seeds(7, 3) != spawn_seeds(8, 3)


def test_gradnav_training_run(small_settings, tiny_scene, tmp_path):
    """Test a short run: metrics, timing, config and checkpoints are written."""
    result = GradNavTrainer(small_settings, [tiny_scene], run_dir=tmp_path / "run").train()
    metrics = result.metrics
    assert list(metrics["epoch"]) == [0, 1]
    assert list(metrics["steps"]) == [8, 16]
    assert np.all(np.isfinite(metrics["loss_actor"]))
    assert np.all(np.isfinite(metrics["loss_critic"]))
    assert np.all(np.isfinite(metrics["loss_cenet"]))
    assert (metrics["aborted"] == 0).all()
    for name in ("metrics.csv", "timing.csv", "config.yaml"):
        assert (result.run_dir / name).is_file()
    assert (result.last_checkpoint / "agent.weights").is_file()
    assert len(read_csv(result.run_dir / "timing.csv")) == 2


def test_training_metrics_are_deterministic(small_settings, tiny_scene, tmp_path):
    """Test that the same seed reproduces metrics.csv exactly."""
    first = make_trainer(small_settings, [tiny_scene], run_dir=tmp_path / "a").train()
    second = make_trainer(small_settings, [tiny_scene], run_dir=tmp_path / "b").train()
    pd.testing.assert_frame_equal(first.metrics, second.metrics)


def test_actor_update_changes_policy(small_settings, tiny_scene, tmp_path):
    """Test that one epoch moves the policy weights."""
    trainer = GradNavTrainer(small_settings, [tiny_scene], run_dir=tmp_path / "run")
    before = trainer.agent.policy.state_dict()
    trainer.env.reset()
    trainer.train_epoch(0)
    after = trainer.agent.policy.state_dict()
    assert any(not np.array_equal(before[k], after[k]) for k in before)


def test_non_finite_epoch_restores_state(small_settings, tiny_scene, tmp_path, monkeypatch):
    """Test that a non-finite epoch is rolled back and the actor lr halved."""
    trainer = GradNavTrainer(small_settings, [tiny_scene], run_dir=tmp_path / "run")
    initial = trainer.agent.state_dict()
    base_lr = trainer.actor_opt.lr

    def broken_epoch(epoch):
        for tensor in trainer.agent.policy.parameters().values():
            tensor.data = tensor.data + np.nan
        raise NonFiniteLossError("actor loss is not finite (nan)")

    monkeypatch.setattr(trainer, "train_epoch", broken_epoch)
    result = trainer.train()
    assert list(result.metrics["aborted"]) == [1, 1]
    assert trainer.actor_opt.lr == pytest.approx(base_lr / 4.0)
    for name, value in trainer.agent.state_dict().items():
        np.testing.assert_array_equal(value, initial[name])


def test_resume_loads_checkpoint(small_settings, tiny_scene, tmp_path):
    """Test that resuming restores the saved agent."""
    result = GradNavTrainer(small_settings, [tiny_scene], run_dir=tmp_path / "run").train()
    fresh = GradNavTrainer(small_settings.model_copy(update={"seed": 99}), [tiny_scene], run_dir=tmp_path / "again")
    meta = fresh.resume(result.last_checkpoint)
    assert meta["algo"] == "gradnav"
    assert meta["epoch"] == 1
    saved = GradNavTrainer(small_settings, [tiny_scene], run_dir=tmp_path / "check")
    saved.resume(result.last_checkpoint)
    for name, value in saved.agent.state_dict().items():
        np.testing.assert_array_equal(fresh.agent.state_dict()[name], value)


def test_trainer_requires_scenes(small_settings):
    """Test that training without a scene is refused."""
    with pytest.raises(ValueError):
        GradNavTrainer(small_settings, [])


def test_curriculum_switches_scenes(small_settings, tiny_scene, tmp_path):
    """Test that the curriculum cycles scenes and resets learning rates at block starts."""
    settings = small_settings.model_copy(
        update={"curriculum": small_settings.curriculum.model_copy(update={"enabled": True, "passes": 1, "epochs_per_pass": 1})}
    )
    other = replace(tiny_scene, name="other")
    result = GradNavTrainer(settings, [tiny_scene, other], run_dir=tmp_path / "run").train()
    assert list(result.metrics["scene"]) == [0, 1]
    assert list(result.metrics["lr_reset"]) == [1, 1]
