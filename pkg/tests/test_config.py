"""
Tests for configuration module.
"""
from pathlib import Path

import pytest
from pydantic import ValidationError

from gradnav.core.config import Settings, dump_settings, load_settings
from gradnav.schemas.config import RandomizationRanges, TrainConfig

DEFAULT_YAML = Path(__file__).resolve().parents[1] / "configs" / "default.yaml"


def test_settings_creation():
    """Test that settings can be created with default values."""
    settings = Settings()
    assert settings.app_name == "gradnav"
    assert settings.env.dt == 0.05
    assert settings.env.episode_length == 600
    assert settings.train.algo == "gradnav"
    assert settings.n_envs == 128
    assert settings.horizon == 32


def test_bptt_defaults_to_whole_episodes():
    """Test that BPTT resolves to 32 environments and a full-episode horizon."""
    settings = Settings(train=TrainConfig(algo="bptt"))
    assert settings.n_envs == 32
    assert settings.horizon == 600


def test_bptt_rejects_partial_horizon():
    """Test that a BPTT horizon shorter than the episode is refused."""
    settings = Settings(train=TrainConfig(algo="bptt", horizon=32))
    with pytest.raises(ValueError, match="bptt"):
        _ = settings.horizon


def test_horizon_longer_than_episode_is_refused():
    """Test that the window may not exceed the episode length."""
    settings = Settings(env={"episode_length": 10}, train={"horizon": 32})
    with pytest.raises(ValueError, match="exceeds"):
        _ = settings.horizon


def test_settings_with_custom_values():
    """Test that settings can be overridden."""
    settings = Settings(seed=7, env={"n_envs": 4}, train={"actor_lr": 3e-4})
    assert settings.seed == 7
    assert settings.n_envs == 4
    assert settings.train.actor_lr == 3e-4


def test_invalid_values_are_rejected():
    """Test that out-of-range fields raise a validation error."""
    with pytest.raises(ValidationError):
        Settings(env={"dt": 0.0})
    with pytest.raises(ValidationError):
        Settings(train={"algo": "sac"})
    with pytest.raises(ValidationError):
        RandomizationRanges(mass=(1.5, 1.0))
    with pytest.raises(ValidationError):
        RandomizationRanges(motor_delay=(0.5, 1.2))


def test_unknown_section_fields_are_forbidden():
    """Test that typos inside a section fail instead of being ignored."""
    with pytest.raises(ValidationError):
        Settings(train={"actor_learning_rate": 1e-3})


def test_environment_variable_override(monkeypatch):
    """Test that nested GRADNAV_ variables override defaults."""
    monkeypatch.setenv("GRADNAV_TRAIN__ACTOR_LR", "0.001")
    monkeypatch.setenv("GRADNAV_SEED", "3")
    settings = Settings()
    assert settings.train.actor_lr == 0.001
    assert settings.seed == 3


def test_load_settings_from_yaml(tmp_path):
    """Test that a YAML file is read and keyword overrides win over it."""
    path = tmp_path / "run.yaml"
    path.write_text("seed: 5\ntrain:\n  algo: ppo\n  epochs: 3\nenv:\n  n_envs: 8\n")
    settings = load_settings(path)
    assert settings.seed == 5
    assert settings.train.algo == "ppo"
    assert settings.train.epochs == 3
    assert settings.n_envs == 8

    overridden = load_settings(path, seed=9)
    assert overridden.seed == 9
    assert overridden.train.algo == "ppo"


def test_load_settings_missing_file(tmp_path):
    """Test that a missing config file raises FileNotFoundError."""
    with pytest.raises(FileNotFoundError):
        load_settings(tmp_path / "absent.yaml")


def test_load_settings_invalid_yaml_value(tmp_path):
    """Test that invalid values in the file raise a validation error."""
    path = tmp_path / "bad.yaml"
    path.write_text("env:\n  episode_length: -4\n")
    with pytest.raises(ValidationError):
        load_settings(path)


def test_dump_and_reload_reproduces_settings(tmp_path):
    """Test that dumped settings load back to the same values."""
    original = Settings(seed=11, train={"algo": "ppo", "horizon": 16}, net={"ablation": "depth_only"})
    path = dump_settings(original, tmp_path / "config.yaml")
    assert load_settings(path).model_dump() == original.model_dump()


def test_default_yaml_matches_model_defaults():
    """Test that the shipped default config equals the model defaults."""
    assert load_settings(DEFAULT_YAML).model_dump() == Settings().model_dump()
