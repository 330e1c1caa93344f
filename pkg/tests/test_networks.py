"""
Tests for the policy, value, context-estimator and visual-encoder networks.
"""
import numpy as np
import pytest

from gradnav.diffcore import ShapeMismatchError, Tensor, check_gradient
from gradnav.models.observation import HISTORY_LENGTH, OBS_DIM, OBS_VELOCITY, PRIV_DIM
from gradnav.services.networks import (
    ACTION_DIM,
    CENet,
    NavigationAgent,
    PolicyNet,
    cenet_loss,
    kl_standard_normal,
)


def _agent(net_config, camera_config, **changes):
    return NavigationAgent(net_config.model_copy(update=changes), camera_config, seed=0)


def _images(n, seed=0):
    return np.random.default_rng(seed).integers(0, 256, size=(n, 16, 16, 3), dtype=np.uint8)


def test_output_shapes(net_config, camera_config):
    """Test the shapes flowing through encoder, estimator, policy and critic."""
    agent = _agent(net_config, camera_config)
    n = 3
    e = agent.embed(_images(n))
    assert e.shape == (n, net_config.visual_dim)
    z = agent.latent(np.zeros((n, HISTORY_LENGTH * OBS_DIM)), e)
    assert z.shape == (n, net_config.latent_dim)
    mean, log_std = agent.act(Tensor(np.zeros((n, OBS_DIM))), z, Tensor(e))
    assert mean.shape == (n, ACTION_DIM)
    assert log_std.shape == (ACTION_DIM,)
    value = agent.critic(Tensor(np.zeros((n, PRIV_DIM))), Tensor(z))
    assert value.shape == (n,)


def test_policy_starts_at_hover_action(net_config, camera_config):
    """Test that the zero-initialized policy head outputs the zero (hover) action."""
    agent = _agent(net_config, camera_config)
    rng = np.random.default_rng(1)
    mean, log_std = agent.act(
        Tensor(rng.normal(size=(4, OBS_DIM))),
        rng.normal(size=(4, net_config.latent_dim)),
        Tensor(rng.normal(size=(4, net_config.visual_dim))),
    )
    np.testing.assert_array_equal(mean.data, 0.0)
    np.testing.assert_array_equal(log_std.data, net_config.log_std_init)


def test_batched_embedding_matches_single_images(net_config, camera_config):
    """Test that embedding a batch equals embedding each image alone."""
    agent = _agent(net_config, camera_config)
    images = _images(3, seed=2)
    batch = agent.embed(images)
    for i in range(3):
        np.testing.assert_allclose(batch[i], agent.embed(images[i:i + 1])[0], atol=1e-12)


def test_encoder_rejects_wrong_image_size(net_config, camera_config):
    """Test that images of another resolution are refused."""
    agent = _agent(net_config, camera_config)
    with pytest.raises(ShapeMismatchError):
        agent.embed(np.zeros((1, 8, 8, 3), dtype=np.uint8))


def test_policy_rejects_wrong_input_width(net_config, camera_config):
    """Test that a mis-sized observation raises ShapeMismatchError."""
    agent = _agent(net_config, camera_config)
    with pytest.raises(ShapeMismatchError):
        agent.policy(Tensor(np.zeros((2, OBS_DIM - 1))), Tensor(np.zeros((2, 16))), Tensor(np.zeros((2, 24))))


def test_gaussian_log_prob_and_entropy():
    """Test the diagonal Gaussian density and entropy against closed forms."""
    rng = np.random.default_rng(3)
    actions, mean = rng.normal(size=(5, ACTION_DIM)), rng.normal(size=(5, ACTION_DIM))
    log_std = rng.normal(size=ACTION_DIM) * 0.3
    std = np.exp(log_std)
    expected = np.sum(-0.5 * ((actions - mean) / std) ** 2 - log_std - 0.5 * np.log(2 * np.pi), axis=1)
    got = PolicyNet.log_prob(Tensor(actions), Tensor(mean), Tensor(log_std))
    np.testing.assert_allclose(got.data, expected, rtol=1e-10)
    entropy = np.sum(log_std + 0.5 * np.log(2 * np.pi * np.e))
    assert PolicyNet.entropy(Tensor(log_std)).item() == pytest.approx(entropy, rel=1e-10)


def test_kl_standard_normal():
    """Test the closed-form KL at the prior and for a shifted mean."""
    zeros = Tensor(np.zeros((3, 4)))
    assert kl_standard_normal(zeros, zeros).item() == pytest.approx(0.0)
    assert kl_standard_normal(Tensor(np.ones((3, 4))), zeros).item() == pytest.approx(2.0)


def test_cenet_latent_mean_and_sample(net_config):
    """Test that zero noise reproduces the posterior mean."""
    cenet = CENet(net_config, np.random.default_rng(0))
    rng = np.random.default_rng(4)
    history = rng.normal(size=(2, HISTORY_LENGTH * OBS_DIM))
    e = rng.normal(size=(2, net_config.visual_dim))
    mean = cenet.latent(history, e)
    np.testing.assert_allclose(cenet.latent(history, e, noise=np.zeros_like(mean)), mean)
    assert not np.allclose(cenet.latent(history, e, noise=np.ones_like(mean)), mean)


def test_cenet_loss_gradient(net_config):
    """Test the tape gradient of the estimator loss against finite differences."""
    cenet = CENet(net_config, np.random.default_rng(0))
    rng = np.random.default_rng(5)
    history = rng.normal(size=(2, HISTORY_LENGTH * OBS_DIM)) * 0.5
    e = Tensor(rng.normal(size=(2, net_config.visual_dim)))
    o_next = Tensor(rng.normal(size=(2, OBS_DIM)))
    noise = rng.normal(size=(2, net_config.latent_dim))

    def objective(h):
        return cenet_loss(cenet, h, e, o_next, beta=0.1, noise=noise)[0]

    assert check_gradient(objective, history, floor=1e-3) < 1e-4


def test_cenet_loss_rejects_negative_beta(net_config):
    """Test that a negative KL weight raises ValueError."""
    cenet = CENet(net_config, np.random.default_rng(0))
    history = Tensor(np.zeros((1, HISTORY_LENGTH * OBS_DIM)))
    with pytest.raises(ValueError):
        cenet_loss(cenet, history, Tensor(np.zeros((1, 24))), Tensor(np.zeros((1, OBS_DIM))), beta=-0.1)


def test_ablation_inputs(net_config, camera_config):
    """Test how each ablation alters the policy inputs."""
    rng = np.random.default_rng(6)
    obs = Tensor(rng.normal(size=(2, OBS_DIM)))
    e = Tensor(rng.normal(size=(2, net_config.visual_dim)))
    z = rng.normal(size=(2, net_config.latent_dim))

    masked, _, _ = _agent(net_config, camera_config, ablation="no_velocity").policy_inputs(obs, z, e)
    np.testing.assert_array_equal(masked.data[:, OBS_VELOCITY], 0.0)
    np.testing.assert_array_equal(masked.data[:, :5], obs.data[:, :5])

    _, _, blind = _agent(net_config, camera_config, ablation="no_visual").policy_inputs(obs, z, e)
    np.testing.assert_array_equal(blind.data, 0.0)

    no_context = _agent(net_config, camera_config, ablation="no_cenet")
    np.testing.assert_array_equal(no_context.latent(np.ones((2, 80)), e.data), 0.0)

    depth_agent = _agent(net_config, camera_config, ablation="depth_only")
    depth = np.full((1, 16, 16), camera_config.far / 2.0)
    encoded = depth_agent.encoder_images(_images(1), depth)
    assert encoded.shape == (1, 16, 16, 3)
    np.testing.assert_allclose(encoded, 0.5)


def test_soft_target_update(net_config, camera_config):
    """Test target <- alpha * target + (1 - alpha) * critic."""
    agent = _agent(net_config, camera_config)
    target_before = agent.target_critic.state_dict()
    for tensor in agent.critic.parameters().values():
        tensor.data = tensor.data + 1.0
    critic = agent.critic.state_dict()
    agent.soft_update_target(0.2)
    for name, value in agent.target_critic.state_dict().items():
        np.testing.assert_allclose(value, 0.2 * target_before[name] + 0.8 * critic[name])


def test_state_dict_round_trip_and_mismatch(net_config, camera_config):
    """Test that agent state loads into a fresh agent and mismatched shapes are refused."""
    source = _agent(net_config, camera_config)
    other = NavigationAgent(net_config, camera_config, seed=9)
    other.load_state_dict(source.state_dict())
    for name, value in source.state_dict().items():
        np.testing.assert_array_equal(other.state_dict()[name], value)

    wider = _agent(net_config, camera_config, hidden_sizes=(8, 12))
    with pytest.raises(ValueError):
        wider.load_state_dict(source.state_dict())
