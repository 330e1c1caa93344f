"""
Tests for the command-line entry point.
"""
import argparse

import pandas as pd
import pytest

from gradnav.cli.main import build_parser, main
from gradnav.core.config import dump_settings
from gradnav.services.scene_service import save_scene
from gradnav.utils.io import read_pfm, read_ppm


@pytest.fixture
def config_file(small_settings, tmp_path):
    return dump_settings(small_settings, tmp_path / "config.yaml")


@pytest.fixture
def scene_file(tiny_scene, tmp_path):
    return save_scene(tiny_scene, tmp_path / "tiny.yaml")


def test_parser_lists_every_command():
    """Test that all subcommands are registered."""
    parser = build_parser()
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    assert set(subparsers.choices) == {"train", "eval", "make-scene", "render", "benchmark", "timing", "analyze-latents"}


def test_missing_scene_exits_with_usage_code(config_file, tmp_path):
    """Test that a missing scene file exits with code 2."""
    assert main(["render", "--config", str(config_file), "--scene", str(tmp_path / "nope.yaml"), "--out", str(tmp_path / "x")]) == 2


def test_invalid_config_exits_with_usage_code(tmp_path, scene_file):
    """Test that an invalid configuration value exits with code 2."""
    bad = tmp_path / "bad.yaml"
    bad.write_text("env:\n  dt: -1\n")
    assert main(["timing", "--config", str(bad), "--scene", str(scene_file), "--steps", "1"]) == 2


def test_make_scene_and_render(tmp_path, config_file):
    """Test writing a gate scene and rendering it to PPM and PFM."""
    scene_path = tmp_path / "gate.yaml"
    assert main(["make-scene", "--gate-y", "0.5", "--seed", "2", "--out", str(scene_path)]) == 0
    assert scene_path.is_file()
    prefix = tmp_path / "view"
    assert main(["render", "--config", str(config_file), "--scene", str(scene_path), "--out", str(prefix)]) == 0
    assert read_ppm(prefix.with_suffix(".ppm")).shape == (16, 16, 3)
    assert read_pfm(prefix.with_suffix(".pfm")).shape == (16, 16)


def test_render_rejects_zero_quaternion(tmp_path, config_file, scene_file):
    """Test that a zero orientation quaternion exits with code 2."""
    argv = ["render", "--config", str(config_file), "--scene", str(scene_file), "--out", str(tmp_path / "v"),
            "--pose", "0", "0", "1", "0", "0", "0", "0"]
    assert main(argv) == 2


def test_timing_command_writes_table(tmp_path, config_file, scene_file, capsys):
    """Test the timing command output table."""
    out = tmp_path / "timing.csv"
    assert main(["timing", "--config", str(config_file), "--scene", str(scene_file),
                 "--n-envs", "2", "--steps", "2", "--out", str(out)]) == 0
    assert list(pd.read_csv(out)["component"]) == ["dynamics", "rendering", "collision"]
    assert "mean step" in capsys.readouterr().out


def test_eval_without_checkpoint_is_a_usage_error(config_file, scene_file):
    """Test that evaluating the agent needs a checkpoint."""
    assert main(["eval", "--config", str(config_file), "--scene", str(scene_file)]) == 2


def test_train_eval_and_latent_analysis(tmp_path, config_file, scene_file, capsys):
    """Test the train -> eval -> analyze-latents workflow on a tiny setup."""
    out = tmp_path / "runs"
    assert main(["train", "--config", str(config_file), "--scene", str(scene_file), "--epochs", "1", "--out", str(out)]) == 0
    run_dir = out / "gradnav_seed0"
    checkpoint = run_dir / "checkpoints" / "last"
    assert (run_dir / "metrics.csv").is_file()
    assert (checkpoint / "meta.yaml").is_file()

    assert main(["eval", "--checkpoint", str(checkpoint), "--scene", str(scene_file), "--n", "2", "--seed", "1"]) == 0
    printed = capsys.readouterr().out
    assert "success: " in printed and "/2" in printed
    traces = run_dir / "eval"
    assert (traces / "trace_000.csv").is_file()

    projection = tmp_path / "pca.csv"
    assert main(["analyze-latents", "--traces", str(traces), "--out", str(projection)]) == 0
    assert list(pd.read_csv(projection).columns) == ["stage", "pc1", "pc2"]
