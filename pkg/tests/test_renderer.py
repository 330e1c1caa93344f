"""
Tests for the Gaussian-splat renderer: compositing weights, occlusion, depth,
determinism and field-of-view obstacle queries.
"""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradnav.models.scene import Camera, Gaussian, Scene
from gradnav.services.renderer import GaussianRenderer, min_obstacle_distance, project_gaussian

IDENTITY = (1.0, 0.0, 0.0, 0.0)
ORIGIN = (0.0, 0.0, 0.0)
CENTER = (8, 8)


def _blob(x, y=0.0, z=0.0, alpha=0.5, color=(1.0, 0.0, 0.0), scale=0.2, obstacle=False):
    return Gaussian(mu=(x, y, z), scale=(scale, scale, scale), color=color, alpha=alpha, obstacle=obstacle)


def test_empty_scene_renders_background(camera):
    """Test that an empty scene yields the background color and far depth everywhere."""
    scene = Scene(background=(0.2, 0.4, 0.6))
    rgb, depth = GaussianRenderer(camera).render(scene, ORIGIN, IDENTITY)
    np.testing.assert_allclose(rgb, np.broadcast_to([0.2, 0.4, 0.6], rgb.shape))
    np.testing.assert_array_equal(depth, np.full(depth.shape, camera.far))


def test_two_gaussian_occlusion_weights(camera):
    """Test front-to-back weights 0.5 and 0.25 at the shared center pixel."""
    scene = Scene(gaussians=[_blob(4.0, color=(0.0, 0.0, 1.0)), _blob(2.0)])
    layers = GaussianRenderer(camera).layers(scene, ORIGIN, IDENTITY)
    row, col = CENTER
    assert layers.weights[0, row, col] == 0.5
    assert layers.weights[1, row, col] == 0.25
    np.testing.assert_array_equal(layers.depths, [2.0, 4.0])
    assert layers.transmittance[row, col] == 0.25


def test_single_gaussian_depth_at_center(camera):
    """Test that an opaque Gaussian 2 m ahead reads 2 m at the center pixel."""
    scene = Scene(gaussians=[_blob(2.0, alpha=1.0, scale=0.3)])
    _, depth = GaussianRenderer(camera).render(scene, ORIGIN, IDENTITY)
    assert depth[CENTER] == pytest.approx(2.0)


def test_gaussian_behind_camera_is_culled(camera):
    """Test that Gaussians behind the near plane do not project or render."""
    behind = _blob(-2.0, alpha=1.0)
    assert project_gaussian(behind, (ORIGIN, IDENTITY), camera) is None
    rgb, _ = GaussianRenderer(camera).render(Scene(gaussians=[behind], background=(0.0, 1.0, 0.0)), ORIGIN, IDENTITY)
    np.testing.assert_allclose(rgb[..., 1], 1.0)


def test_projection_of_centered_gaussian(camera):
    """Test the projected mean and camera depth of a Gaussian on the optical axis."""
    projection = project_gaussian(_blob(3.0), (ORIGIN, IDENTITY), camera)
    np.testing.assert_allclose(projection.mean, [camera.cx, camera.cy])
    assert projection.depth == pytest.approx(3.0)
    assert projection.cov[0, 0] > 0 and projection.cov[1, 1] > 0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), count=st.integers(1, 6))
def test_weights_and_transmittance_partition_unity(seed, count):
    """Test that blend weights plus the final transmittance sum to one per pixel."""
    rng = np.random.default_rng(seed)
    gaussians = [
        Gaussian(
            mu=(float(rng.uniform(1.0, 5.0)), float(rng.uniform(-1.0, 1.0)), float(rng.uniform(-1.0, 1.0))),
            scale=tuple(float(s) for s in rng.uniform(0.05, 0.5, size=3)),
            color=tuple(float(c) for c in rng.uniform(0.0, 1.0, size=3)),
            alpha=float(rng.uniform(0.0, 1.0)),
        )
        for _ in range(count)
    ]
    cam = Camera(fx=8.0, fy=8.0, cx=8.0, cy=8.0, width=16, height=16, near=0.05, far=10.0, fov_half_angle=0.785398)
    layers = GaussianRenderer(cam).layers(Scene(gaussians=gaussians), ORIGIN, IDENTITY)
    total = layers.weights.sum(axis=0) + layers.transmittance
    np.testing.assert_allclose(total, 1.0, atol=1e-9)


def test_render_is_deterministic_and_order_independent(camera):
    """Test that shuffling the Gaussians leaves the image byte-identical."""
    gaussians = [_blob(2.0 + 0.5 * i, y=0.1 * i, alpha=0.4, color=(0.1 * i, 0.5, 0.2)) for i in range(5)]
    renderer = GaussianRenderer(camera)
    rgb_a, depth_a = renderer.render(Scene(gaussians=gaussians), ORIGIN, IDENTITY)
    rgb_b, depth_b = renderer.render(Scene(gaussians=list(reversed(gaussians))), ORIGIN, IDENTITY)
    assert rgb_a.tobytes() == rgb_b.tobytes()
    assert depth_a.tobytes() == depth_b.tobytes()


def test_render_batch_matches_single_views(camera, tiny_scene):
    """Test that batched rendering equals per-pose rendering."""
    renderer = GaussianRenderer(camera)
    positions = np.array([[0.0, 0.0, 1.3], [1.0, 0.2, 1.0]])
    quats = np.array([IDENTITY, IDENTITY])
    rgb, depth = renderer.render_batch(tiny_scene, positions, quats)
    single_rgb, single_depth = renderer.render(tiny_scene, positions[1], quats[1])
    np.testing.assert_array_equal(rgb[1], single_rgb)
    np.testing.assert_array_equal(depth[1], single_depth)


def test_obstacle_distance_respects_field_of_view(camera):
    """Test that only obstacles inside the view cone count."""
    ahead = _blob(2.0, obstacle=True)
    behind = _blob(-1.0, obstacle=True)
    scene = Scene(gaussians=[ahead, behind])
    assert min_obstacle_distance(scene, (ORIGIN, IDENTITY), camera) == pytest.approx(2.0)
    only_behind = Scene(gaussians=[behind])
    assert min_obstacle_distance(only_behind, (ORIGIN, IDENTITY), camera) == np.inf


def test_explicit_obstacle_points_override_tagged_means(camera):
    """Test that explicit obstacle points replace the tagged Gaussian means."""
    scene = Scene(gaussians=[_blob(2.0, obstacle=True)], obstacle_points=[(3.0, 0.0, 0.0)])
    assert min_obstacle_distance(scene, (ORIGIN, IDENTITY), camera) == pytest.approx(3.0)
