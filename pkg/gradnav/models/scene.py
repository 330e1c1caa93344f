"""
Gaussian scenes and the body-mounted camera.
"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np

from gradnav.schemas.config import CameraConfig

Vec3 = Tuple[float, float, float]

# Body frame is x forward, y left, z up; camera frame is x right, y down, z forward.
BODY_TO_CAMERA = np.array(
    [
        [0.0, -1.0, 0.0],
        [0.0, 0.0, -1.0],
        [1.0, 0.0, 0.0],
    ]
)


@dataclass(frozen=True)
class Gaussian:
    """One anisotropic primitive: mean, per-axis std, orientation (w, x, y, z), RGB, opacity."""

    mu: Vec3
    scale: Vec3
    rot: Tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    color: Vec3 = (0.5, 0.5, 0.5)
    alpha: float = 1.0
    obstacle: bool = False

    def __post_init__(self):
        if min(self.scale) <= 0:
            raise ValueError(f"Gaussian scales must be positive, got {self.scale}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"Gaussian alpha must lie in [0, 1], got {self.alpha}")


@dataclass(frozen=True)
class GaussianArrays:
    """Column-packed view of a scene's primitives for vectorized rendering."""

    mu: np.ndarray
    scale: np.ndarray
    rot: np.ndarray
    color: np.ndarray
    alpha: np.ndarray
    obstacle: np.ndarray

    @property
    def count(self) -> int:
        return int(self.mu.shape[0])


@dataclass(frozen=True)
class Scene:
    """
    A navigable scene.

    Attributes:
        gaussians: primitives in file order (rendering sorts internally)
        background: RGB behind everything
        bounds: ((xmin, ymin, zmin), (xmax, ymax, zmax)) in m
        waypoints: strictly increasing in x
        reference_trajectory: polyline with at least two points
        obstacle_points: explicit distance-query points; None uses the means
            of primitives tagged as obstacles
        gate_center: center of the gate opening, if the scene has one
    """

    gaussians: List[Gaussian] = field(default_factory=list)
    background: Vec3 = (0.0, 0.0, 0.0)
    bounds: Tuple[Vec3, Vec3] = ((-1.0, -3.0, 0.0), (10.0, 3.0, 3.0))
    waypoints: List[Vec3] = field(default_factory=list)
    reference_trajectory: List[Vec3] = field(default_factory=lambda: [(0.0, 0.0, 1.3), (9.0, 0.0, 1.3)])
    obstacle_points: Optional[List[Vec3]] = None
    gate_center: Optional[Vec3] = None
    name: str = "scene"

    def __post_init__(self):
        if len(self.reference_trajectory) < 2:
            raise ValueError("reference_trajectory needs at least 2 points")
        xs = [w[0] for w in self.waypoints]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError(f"waypoints must be strictly increasing in x, got x = {xs}")
        low, high = self.bounds
        if any(lo >= hi for lo, hi in zip(low, high)):
            raise ValueError(f"bounds must have min < max on every axis, got {self.bounds}")

    @cached_property
    def packed(self) -> GaussianArrays:
        count = len(self.gaussians)
        if count == 0:
            return GaussianArrays(
                mu=np.zeros((0, 3)),
                scale=np.ones((0, 3)),
                rot=np.zeros((0, 4)),
                color=np.zeros((0, 3)),
                alpha=np.zeros(0),
                obstacle=np.zeros(0, dtype=bool),
            )
        return GaussianArrays(
            mu=np.array([g.mu for g in self.gaussians], dtype=np.float64),
            scale=np.array([g.scale for g in self.gaussians], dtype=np.float64),
            rot=np.array([g.rot for g in self.gaussians], dtype=np.float64),
            color=np.array([g.color for g in self.gaussians], dtype=np.float64),
            alpha=np.array([g.alpha for g in self.gaussians], dtype=np.float64),
            obstacle=np.array([g.obstacle for g in self.gaussians], dtype=bool),
        )

    @cached_property
    def obstacle_array(self) -> np.ndarray:
        if self.obstacle_points is not None:
            return np.asarray(self.obstacle_points, dtype=np.float64).reshape(-1, 3)
        packed = self.packed
        return packed.mu[packed.obstacle]

    @cached_property
    def waypoint_array(self) -> np.ndarray:
        return np.asarray(self.waypoints, dtype=np.float64).reshape(-1, 3)

    @cached_property
    def trajectory_array(self) -> np.ndarray:
        return np.asarray(self.reference_trajectory, dtype=np.float64).reshape(-1, 3)

    @cached_property
    def bounds_array(self) -> np.ndarray:
        return np.asarray(self.bounds, dtype=np.float64)


@dataclass(frozen=True)
class Camera:
    """Pinhole camera; ``mount_rotation`` maps body-frame vectors into the camera frame."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    near: float
    far: float
    fov_half_angle: float
    mount_rotation: np.ndarray = field(default_factory=lambda: BODY_TO_CAMERA.copy(), compare=False)
    mount_translation: np.ndarray = field(default_factory=lambda: np.zeros(3), compare=False)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"camera size must be at least 1x1, got {self.width}x{self.height}")
        if self.near <= 0:
            raise ValueError(f"camera near plane must be positive, got {self.near}")

    @classmethod
    def from_config(cls, config: CameraConfig) -> "Camera":
        pitch = config.mount_pitch
        # Downward tilt rotates the optical axis about the body y axis.
        tilt = np.array(
            [
                [np.cos(pitch), 0.0, np.sin(pitch)],
                [0.0, 1.0, 0.0],
                [-np.sin(pitch), 0.0, np.cos(pitch)],
            ]
        )
        return cls(
            fx=config.fx,
            fy=config.fy,
            cx=config.width / 2.0 if config.cx is None else config.cx,
            cy=config.height / 2.0 if config.cy is None else config.cy,
            width=config.width,
            height=config.height,
            near=config.near,
            far=config.far,
            fov_half_angle=config.fov_half_angle,
            mount_rotation=BODY_TO_CAMERA @ tilt.T,
            mount_translation=np.asarray(config.mount_translation, dtype=np.float64),
        )
