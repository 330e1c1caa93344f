"""
Tests for whole-episode backpropagation through time.
"""
import numpy as np

from gradnav.services.trainers import BPTTTrainer


def _bptt_settings(settings):
    return settings.model_copy(update={"train": settings.train.model_copy(update={"algo": "bptt", "horizon": None})})


def test_bptt_uses_whole_episodes(small_settings, tiny_scene, tmp_path):
    """Test that each epoch covers one full episode per environment."""
    settings = _bptt_settings(small_settings)
    trainer = BPTTTrainer(settings, [tiny_scene], run_dir=tmp_path / "run")
    assert trainer.horizon == settings.env.episode_length
    result = trainer.train()
    metrics = result.metrics
    length = settings.env.episode_length
    assert list(metrics["steps"]) == [2 * length, 4 * length]
    assert list(metrics["episodes"]) == [2, 2]
    assert np.all(np.isfinite(metrics["episode_reward"]))
    assert np.all(np.isnan(metrics["loss_critic"]))
    assert result.best_checkpoint is not None
    assert (result.best_checkpoint / "meta.yaml").is_file()


def test_bptt_moves_policy_without_critic(small_settings, tiny_scene, tmp_path):
    """Test that the actor learns while the critic stays untouched."""
    trainer = BPTTTrainer(_bptt_settings(small_settings), [tiny_scene], run_dir=tmp_path / "run")
    policy_before = trainer.agent.policy.state_dict()
    critic_before = trainer.agent.critic.state_dict()
    trainer.env.reset()
    stats = trainer.train_epoch(0)
    assert np.isfinite(stats["grad_norm"])
    policy_after = trainer.agent.policy.state_dict()
    assert any(not np.array_equal(policy_before[k], policy_after[k]) for k in policy_before)
    for name, value in trainer.agent.critic.state_dict().items():
        np.testing.assert_array_equal(value, critic_before[name])
