"""
Shared fixtures: tiny cameras, networks and scenes so every test stays fast.
"""
import pytest

from gradnav.core.config import Settings
from gradnav.models.scene import Camera, Gaussian, Scene
from gradnav.schemas.config import CameraConfig, EnvConfig, NetConfig, TrainConfig


@pytest.fixture
def camera_config():
    return CameraConfig(width=16, height=16, fx=8.0, fy=8.0)


@pytest.fixture
def camera(camera_config):
    return Camera.from_config(camera_config)


@pytest.fixture
def net_config():
    return NetConfig(hidden_sizes=(8, 8), encoder_channels=(4, 4), encoder_hidden=8)


@pytest.fixture
def tiny_scene():
    """Two waypoints, one obstacle blob between them, a couple of wall blobs."""
    return Scene(
        gaussians=[
            Gaussian(mu=(3.0, 0.8, 1.3), scale=(0.1, 0.1, 0.1), color=(0.9, 0.1, 0.1), alpha=0.9, obstacle=True),
            Gaussian(mu=(6.0, 0.0, 1.3), scale=(0.3, 1.0, 1.0), color=(0.2, 0.3, 0.8), alpha=0.9),
            Gaussian(mu=(2.0, 0.0, 0.0), scale=(1.0, 1.0, 0.05), color=(0.4, 0.4, 0.4), alpha=0.9),
        ],
        background=(0.7, 0.8, 0.95),
        waypoints=[(2.0, 0.0, 1.3), (4.0, 0.0, 1.3)],
        reference_trajectory=[(0.0, 0.0, 1.3), (2.0, 0.0, 1.3), (4.0, 0.0, 1.3), (9.0, 0.0, 1.3)],
        gate_center=(3.0, 0.0, 1.3),
        name="tiny",
    )


@pytest.fixture
def small_settings(tmp_path, camera_config, net_config):
    """Settings for fast end-to-end runs: 2 envs, 16x16 renders, narrow networks."""
    return Settings(
        output_dir=str(tmp_path / "runs"),
        camera=camera_config,
        env=EnvConfig(n_envs=2, episode_length=12),
        net=net_config,
        train=TrainConfig(
            epochs=2,
            horizon=4,
            critic_iterations=2,
            critic_minibatches=2,
            cenet_batch_size=8,
            encoder_chunk=3,
            ppo_epochs=2,
            ppo_minibatches=2,
            checkpoint_interval=1,
        ),
    )
