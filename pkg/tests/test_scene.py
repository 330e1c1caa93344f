"""
Tests for scene files and procedural gate scenes.
"""
import numpy as np
import pytest

from gradnav.models.scene import Gaussian, Scene
from gradnav.services.scene_service import (
    GATE_X,
    SceneFormatError,
    curriculum_scenes,
    load_scene,
    make_gate_scene,
    make_hover_scene,
    save_scene,
)

VALID_SCENE = """\
name: box
background: [0.1, 0.2, 0.3]
bounds: {min: [-1, -2, 0], max: [5, 2, 3]}
waypoints: [[1, 0, 1], [3, 0, 1]]
reference_trajectory: [[0, 0, 1], [4, 0, 1]]
gaussians:
  - {mu: [2, 0, 1], scale: [0.1, 0.1, 0.1], rot: [1, 0, 0, 0], color: [1, 0, 0], alpha: 0.5, obstacle: true}
  - {mu: [3, 1, 1], scale: [0.2, 0.2, 0.2], rot: [1, 0, 0, 0], color: [0, 1, 0], alpha: 1.5}
"""


def test_save_and_load_scene(tmp_path, tiny_scene):
    """Test that a saved scene loads back equal."""
    path = save_scene(tiny_scene, tmp_path / "tiny.yaml")
    assert load_scene(path) == tiny_scene


def test_load_scene_reports_field_and_line(tmp_path):
    """Test that an invalid field names its path and line."""
    path = tmp_path / "bad.yaml"
    path.write_text(VALID_SCENE)
    with pytest.raises(SceneFormatError) as excinfo:
        load_scene(path)
    message = str(excinfo.value)
    assert "gaussians[1].alpha" in message
    assert "line 8" in message


def test_load_scene_yaml_syntax_error(tmp_path):
    """Test that broken YAML raises SceneFormatError with a line number."""
    path = tmp_path / "broken.yaml"
    path.write_text("bounds: {min: [0, 0, 0]\nwaypoints: [\n")
    with pytest.raises(SceneFormatError, match="line"):
        load_scene(path)


def test_load_scene_rejects_decreasing_waypoints(tmp_path):
    """Test that waypoints out of x order are refused."""
    path = tmp_path / "order.yaml"
    path.write_text(VALID_SCENE.replace("alpha: 1.5", "alpha: 1.0").replace("[[1, 0, 1], [3, 0, 1]]", "[[3, 0, 1], [1, 0, 1]]"))
    with pytest.raises(SceneFormatError, match="waypoints"):
        load_scene(path)


def test_load_scene_missing_file(tmp_path):
    """Test that a missing scene file raises FileNotFoundError."""
    with pytest.raises(FileNotFoundError):
        load_scene(tmp_path / "absent.yaml")


def test_scene_obstacle_points_default_to_tagged_means(tmp_path):
    """Test that obstacle points come from tagged Gaussians unless given explicitly."""
    path = tmp_path / "ok.yaml"
    path.write_text(VALID_SCENE.replace("alpha: 1.5", "alpha: 1.0"))
    scene = load_scene(path)
    np.testing.assert_array_equal(scene.obstacle_array, [[2.0, 0.0, 1.0]])


def test_scene_model_validation():
    """Test the invariants checked when building a scene in code."""
    with pytest.raises(ValueError):
        Scene(reference_trajectory=[(0.0, 0.0, 1.0)])
    with pytest.raises(ValueError):
        Scene(waypoints=[(1.0, 0.0, 1.0), (1.0, 1.0, 1.0)])
    with pytest.raises(ValueError):
        Gaussian(mu=(0.0, 0.0, 0.0), scale=(0.1, 0.0, 0.1))


@pytest.mark.parametrize("gate_y", [-1.0, 0.0, 1.0])
def test_gate_scene_opening_is_clear(gate_y):
    """Test that the gate opening and its approach leave room to pass."""
    scene = make_gate_scene(gate_y=gate_y, distractor_seed=3)
    center = np.array(scene.gate_center)
    assert center[0] == GATE_X and center[1] == gate_y
    clearance = np.linalg.norm(scene.obstacle_array - center, axis=1).min()
    assert clearance >= 0.4
    assert any(np.allclose(w, center) for w in scene.waypoints)
    low, high = scene.bounds_array
    assert np.all(scene.trajectory_array >= low) and np.all(scene.trajectory_array <= high)


def test_gate_scene_is_deterministic():
    """Test that the same seed yields the same scene."""
    assert make_gate_scene(0.5, distractor_seed=4) == make_gate_scene(0.5, distractor_seed=4)


def test_gate_scene_rejects_offsets_outside_room():
    """Test that the opening must stay inside the room."""
    with pytest.raises(ValueError):
        make_gate_scene(gate_y=2.5)


def test_curriculum_and_hover_scenes():
    """Test the built-in curriculum and hover scenes."""
    scenes = curriculum_scenes()
    assert [s.gate_center[1] for s in scenes] == [-1.0, 0.0, 1.0]
    hover = make_hover_scene()
    assert hover.waypoints == []
    assert hover.obstacle_array.shape == (0, 3)
