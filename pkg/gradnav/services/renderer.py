"""
CPU Gaussian-splat renderer.

Gaussians are projected with a linearized (EWA) pinhole model, sorted front to
back by camera depth, and alpha-composited per pixel with peak-normalized 2D
footprints. The renderer is a pure numpy function of scene and pose; it is not
part of the differentiable graph.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from gradnav.models.scene import Camera, Gaussian, GaussianArrays, Scene
from gradnav.services.dynamics import rotation_matrix

logger = logging.getLogger(__name__)

Pose = Tuple[Sequence[float], Sequence[float]]

COVARIANCE_FILTER = 0.3
CULL_SIGMAS = 3.0
MIN_WEIGHT_FOR_DEPTH = 1e-3


@dataclass
class Projection:
    """Projected footprint of one Gaussian: mean (px), covariance (px^2) and camera depth (m)."""

    mean: np.ndarray
    cov: np.ndarray
    depth: float


@dataclass
class RenderLayers:
    """
    Sorted compositing layers of one view.

    Attributes:
        weights: (M, H, W) blend weights w_i, front to back
        transmittance: (H, W) light surviving all layers
        colors: (M, 3) sorted colors
        depths: (M,) sorted camera depths
    """

    weights: np.ndarray
    transmittance: np.ndarray
    colors: np.ndarray
    depths: np.ndarray


def _unit_rotations(quats: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(quats, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("Gaussian rotation quaternion has zero length")
    return rotation_matrix(quats / norms).data


class GaussianRenderer:
    """Renders RGB and depth views of a scene from drone poses."""

    def __init__(self, camera: Camera):
        self.camera = camera
        rows, cols = np.meshgrid(
            np.arange(camera.height, dtype=np.float64),
            np.arange(camera.width, dtype=np.float64),
            indexing="ij",
        )
        self._pixel_u = cols
        self._pixel_v = rows

    # ------------------------------------------------------------ transforms
    def view(self, position: Sequence[float], quaternion: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
        """
        World-to-camera rotation W and camera origin for a body pose.

        A world point x maps to camera coordinates W @ (x - origin).
        """
        q = np.asarray(quaternion, dtype=np.float64)
        body_to_world = _unit_rotations(q[None])[0]
        origin = np.asarray(position, dtype=np.float64) + body_to_world @ self.camera.mount_translation
        return self.camera.mount_rotation @ body_to_world.T, origin

    def project(self, packed: GaussianArrays, world_to_cam: np.ndarray, origin: np.ndarray):
        """
        Project every Gaussian of a scene.

        Returns:
            means (N, 2), covariances (N, 2, 2), depths (N,), and a mask of
            Gaussians in front of the near plane
        """
        cam = self.camera
        points = (packed.mu - origin) @ world_to_cam.T
        depth = points[:, 2]
        valid = depth > cam.near
        z = np.where(valid, depth, 1.0)
        x, y = points[:, 0], points[:, 1]

        rot = _unit_rotations(packed.rot) if packed.count else np.zeros((0, 3, 3))
        cov3d = rot @ (packed.scale[:, :, None] ** 2 * np.swapaxes(rot, 1, 2))

        jac = np.zeros((packed.count, 2, 3))
        jac[:, 0, 0] = cam.fx / z
        jac[:, 0, 2] = -cam.fx * x / (z * z)
        jac[:, 1, 1] = cam.fy / z
        jac[:, 1, 2] = -cam.fy * y / (z * z)
        t = jac @ world_to_cam
        cov2d = t @ cov3d @ np.swapaxes(t, 1, 2) + COVARIANCE_FILTER * np.eye(2)

        means = np.stack([cam.fx * x / z + cam.cx, cam.fy * y / z + cam.cy], axis=1)
        return means, cov2d, depth, valid

    # ------------------------------------------------------------- rendering
    def layers(self, scene: Scene, position: Sequence[float], quaternion: Sequence[float]) -> RenderLayers:
        """Sorted blend weights of all Gaussians that touch the image."""
        cam = self.camera
        packed = scene.packed
        height, width = cam.height, cam.width
        if packed.count == 0:
            return RenderLayers(np.zeros((0, height, width)), np.ones((height, width)), np.zeros((0, 3)), np.zeros(0))

        world_to_cam, origin = self.view(position, quaternion)
        means, cov2d, depth, valid = self.project(packed, world_to_cam, origin)

        radius_u = CULL_SIGMAS * np.sqrt(cov2d[:, 0, 0])
        radius_v = CULL_SIGMAS * np.sqrt(cov2d[:, 1, 1])
        on_image = (
            (means[:, 0] + radius_u >= 0) & (means[:, 0] - radius_u <= width - 1)
            & (means[:, 1] + radius_v >= 0) & (means[:, 1] - radius_v <= height - 1)
        )
        keep = np.flatnonzero(valid & on_image)
        if keep.size == 0:
            return RenderLayers(np.zeros((0, height, width)), np.ones((height, width)), np.zeros((0, 3)), np.zeros(0))

        # Depth first; remaining attributes break ties so input order never matters.
        keys = [packed.alpha[keep]]
        keys += [packed.color[keep, i] for i in range(2, -1, -1)]
        keys += [packed.rot[keep, i] for i in range(3, -1, -1)]
        keys += [packed.scale[keep, i] for i in range(2, -1, -1)]
        keys += [packed.mu[keep, i] for i in range(2, -1, -1)]
        keys.append(depth[keep])
        order = keep[np.lexsort(keys)]

        mean = means[order]
        cov = cov2d[order]
        det = cov[:, 0, 0] * cov[:, 1, 1] - cov[:, 0, 1] * cov[:, 1, 0]
        conic_a = cov[:, 1, 1] / det
        conic_b = -cov[:, 0, 1] / det
        conic_c = cov[:, 0, 0] / det

        du = self._pixel_u[None] - mean[:, 0, None, None]
        dv = self._pixel_v[None] - mean[:, 1, None, None]
        power = -0.5 * (
            conic_a[:, None, None] * du * du
            + 2.0 * conic_b[:, None, None] * du * dv
            + conic_c[:, None, None] * dv * dv
        )
        inside = (np.abs(du) <= radius_u[order, None, None]) & (np.abs(dv) <= radius_v[order, None, None])
        footprint = np.where(inside, np.exp(np.minimum(power, 0.0)), 0.0)
        opacity = packed.alpha[order, None, None] * footprint

        survive = np.cumprod(1.0 - opacity, axis=0)
        before = np.concatenate([np.ones((1, height, width)), survive[:-1]], axis=0)
        weights = opacity * before
        return RenderLayers(weights, survive[-1], packed.color[order], depth[order])

    def render(self, scene: Scene, position: Sequence[float], quaternion: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
        """
        Render one view.

        Returns:
            rgb (H, W, 3) in [0, 1] and depth (H, W) in m
        """
        layers = self.layers(scene, position, quaternion)
        background = np.asarray(scene.background, dtype=np.float64)
        rgb = np.einsum("mhw,mc->hwc", layers.weights, layers.colors) + layers.transmittance[..., None] * background
        total = layers.weights.sum(axis=0)
        weighted_depth = np.einsum("mhw,m->hw", layers.weights, layers.depths)
        depth = np.where(
            total >= MIN_WEIGHT_FOR_DEPTH,
            weighted_depth / np.maximum(total, 1e-12),
            self.camera.far,
        )
        return rgb, depth

    def render_batch(self, scene: Scene, positions: np.ndarray, quaternions: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Render (n, H, W, 3) RGB and (n, H, W) depth, one independent view per row."""
        n = positions.shape[0]
        rgb = np.empty((n, self.camera.height, self.camera.width, 3))
        depth = np.empty((n, self.camera.height, self.camera.width))
        for i in range(n):
            rgb[i], depth[i] = self.render(scene, positions[i], quaternions[i])
        return rgb, depth

    # ------------------------------------------------------------- geometry
    def nearest_visible_obstacle(
        self, scene: Scene, positions: np.ndarray, quaternions: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Closest obstacle point inside the camera's field of view, per pose.

        Returns:
            distances (n,) from the body position (inf when none is visible) and
            the index of that point in ``scene.obstacle_array`` (-1 when none)
        """
        points = scene.obstacle_array
        n = positions.shape[0]
        if points.shape[0] == 0:
            return np.full(n, np.inf), np.full(n, -1, dtype=np.int64)

        cam = self.camera
        body_to_world = _unit_rotations(np.asarray(quaternions, dtype=np.float64))
        origins = positions + np.einsum("nij,j->ni", body_to_world, cam.mount_translation)
        world_to_cam = np.einsum("ij,nkj->nik", cam.mount_rotation, body_to_world)
        rel = points[None, :, :] - origins[:, None, :]
        in_cam = np.einsum("nij,nkj->nki", world_to_cam, rel)
        ray = np.linalg.norm(in_cam, axis=-1)
        visible = (in_cam[..., 2] > 0) & (in_cam[..., 2] >= ray * np.cos(cam.fov_half_angle))

        distance = np.linalg.norm(points[None, :, :] - positions[:, None, :], axis=-1)
        distance = np.where(visible, distance, np.inf)
        index = np.argmin(distance, axis=1)
        nearest = distance[np.arange(n), index]
        index = np.where(np.isfinite(nearest), index, -1)
        return nearest, index


def project_gaussian(g: Gaussian, pose: Pose, cam: Camera) -> Optional[Projection]:
    """
    Project a single Gaussian.

    Returns:
        The projection, or None when the Gaussian is not beyond the near plane
        (the renderer culls it)
    """
    renderer = GaussianRenderer(cam)
    world_to_cam, origin = renderer.view(*pose)
    packed = Scene(gaussians=[g]).packed
    means, cov2d, depth, valid = renderer.project(packed, world_to_cam, origin)
    if not valid[0]:
        return None
    return Projection(mean=means[0], cov=cov2d[0], depth=float(depth[0]))


def render_rgb(scene: Scene, pose: Pose, cam: Camera) -> np.ndarray:
    return GaussianRenderer(cam).render(scene, *pose)[0]


def render_depth(scene: Scene, pose: Pose, cam: Camera) -> np.ndarray:
    return GaussianRenderer(cam).render(scene, *pose)[1]


def min_obstacle_distance(scene: Scene, pose: Pose, cam: Camera) -> float:
    """Distance from the body to the closest obstacle point within the field of view (inf if none)."""
    position, quaternion = pose
    distances, _ = GaussianRenderer(cam).nearest_visible_obstacle(
        scene,
        np.asarray(position, dtype=np.float64)[None],
        np.asarray(quaternion, dtype=np.float64)[None],
    )
    return float(distances[0])
