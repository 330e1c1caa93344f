"""
Stepwise navigation reward and early-termination rules.

Every reward component is a differentiable function of the drone state and the
policy actions; geometric lookups (next waypoint, nearest visible obstacle,
closest reference segment) are resolved on the current values and enter the
graph as constants.
"""
import logging
from typing import Optional, Tuple

import numpy as np

from gradnav.diffcore import Tensor, ops
from gradnav.models.drone import DroneState
from gradnav.models.observation import REWARD_TERMS, RewardBreakdown, TerminationFlags
from gradnav.models.scene import Camera, Scene
from gradnav.schemas.config import RewardWeights
from gradnav.services.dynamics import body_x_axis
from gradnav.services.renderer import GaussianRenderer

logger = logging.getLogger(__name__)

MIN_SPEED = 1e-6


def nearest_reference_direction(p: np.ndarray, trajectory: np.ndarray) -> np.ndarray:
    """
    Unit tangent of the polyline segment closest to each position.

    Ties go to the lower segment index.

    Args:
        p: (3,) or (n, 3) positions
        trajectory: (m, 3) polyline, m >= 2

    Returns:
        (3,) or (n, 3) unit directions
    """
    points = np.asarray(trajectory, dtype=np.float64)
    if points.shape[0] < 2:
        raise ValueError("reference trajectory needs at least 2 points")
    positions = np.atleast_2d(np.asarray(p, dtype=np.float64))
    starts, ends = points[:-1], points[1:]
    seg = ends - starts
    length_sq = np.sum(seg * seg, axis=1)
    usable = length_sq > 0
    safe_len = np.where(usable, length_sq, 1.0)

    rel = positions[:, None, :] - starts[None, :, :]
    t = np.clip(np.sum(rel * seg[None], axis=2) / safe_len[None], 0.0, 1.0)
    closest = starts[None] + t[..., None] * seg[None]
    distance = np.linalg.norm(positions[:, None, :] - closest, axis=2)
    distance = np.where(usable[None], distance, np.inf)
    best = np.argmin(distance, axis=1)
    tangent = seg[best] / np.sqrt(safe_len[best])[:, None]
    return tangent[0] if np.ndim(p) == 1 else tangent


def next_waypoint_index(p: np.ndarray, waypoints: np.ndarray) -> np.ndarray:
    """Index of the closest waypoint ahead in x (-1 once every waypoint is behind), per position."""
    positions = np.atleast_2d(p)
    n = positions.shape[0]
    if waypoints.shape[0] == 0:
        return np.full(n, -1, dtype=np.int64)
    ahead = waypoints[None, :, 0] > positions[:, None, 0]
    distance = np.linalg.norm(positions[:, None, :] - waypoints[None], axis=2)
    distance = np.where(ahead, distance, np.inf)
    index = np.argmin(distance, axis=1)
    return np.where(ahead.any(axis=1), index, -1)


class RewardService:
    """Weighted reward terms plus termination checks for one weight set."""

    def __init__(self, weights: Optional[RewardWeights] = None):
        self.weights = weights or RewardWeights()

    def check_termination(self, state: DroneState, scene: Scene, fault: Optional[np.ndarray] = None) -> TerminationFlags:
        """
        Early-termination flags: above the ceiling, over the speed limit, or more
        than ``oob_limit`` outside the scene bounds on any axis.
        """
        w = self.weights
        p = state.p.data
        speed = np.linalg.norm(state.v.data, axis=1)
        low, high = scene.bounds_array
        overshoot = np.maximum(np.maximum(p - high, low - p), 0.0).max(axis=1)
        return TerminationFlags(
            ceiling_exceeded=p[:, 2] > w.ceiling,
            speed_exceeded=speed > w.v_limit,
            out_of_bounds=overshoot > w.oob_limit,
            fault=np.zeros(state.n, dtype=bool) if fault is None else np.asarray(fault, dtype=bool),
        )

    def compute_reward(
        self,
        state: DroneState,
        action: Tensor,
        prev_action: Tensor,
        prev2_action: Tensor,
        q0: np.ndarray,
        scene: Scene,
        cam: Camera,
        flags: Optional[TerminationFlags] = None,
        obstacle: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    ) -> RewardBreakdown:
        """
        Evaluate every reward term for a batch.

        Args:
            state: drone states after the step
            action, prev_action, prev2_action: a_t, a_{t-1}, a_{t-2} as emitted by the policy
            q0: (n, 4) initial quaternions of the episodes
            scene: scene providing waypoints, bounds, obstacles and reference path
            cam: camera used for the obstacle field-of-view test
            flags: termination flags; computed from the state when omitted
            obstacle: precomputed (distance, point index) of the nearest visible obstacle

        Returns:
            Components (n,) and the weighted total
        """
        w = self.weights
        n = state.n
        if flags is None:
            flags = self.check_termination(state, scene)
        if obstacle is None:
            obstacle = GaussianRenderer(cam).nearest_visible_obstacle(scene, state.p.data, state.q.data)

        p, q, v = state.p, state.q, state.v
        terms = {}
        terms["survival"] = Tensor(np.where(flags.any, 0.0, 1.0))
        terms["linear_velocity"] = ops.sum(v * v, axis=1)

        q0 = np.asarray(q0, dtype=np.float64)
        sign = np.where(np.sum(q.data * q0, axis=1) < 0.0, -1.0, 1.0)[:, None]
        terms["pose"] = ops.norm(q * sign - q0, axis=1)

        height_error = p[:, 2] - w.h_target
        terms["height"] = height_error * height_error

        rate = action - prev_action
        jerk = action - 2.0 * prev_action + prev2_action
        terms["action"] = ops.sum(action * action, axis=1)
        terms["action_rate"] = ops.sum(rate * rate, axis=1)
        terms["smoothness"] = ops.sum(jerk * jerk, axis=1)

        heading = body_x_axis(q)[:, :2]
        heading = heading / ops.reshape(ops.maximum(ops.norm(heading, axis=1), 1e-9), (n, 1))
        v_xy = v[:, :2]
        planar_speed = ops.norm(v_xy, axis=1)
        moving_xy = planar_speed.data >= MIN_SPEED
        alignment = ops.sum(v_xy * heading, axis=1) / ops.where(moving_xy, planar_speed, 1.0)
        terms["yaw_alignment"] = ops.where(moving_xy, alignment, 0.0)

        waypoint_index = next_waypoint_index(p.data, scene.waypoint_array)
        has_waypoint = waypoint_index >= 0
        targets = np.zeros((n, 3))
        if has_waypoint.any():
            targets[has_waypoint] = scene.waypoint_array[waypoint_index[has_waypoint]]
        offset = p - targets
        terms["waypoint"] = ops.where(has_waypoint, ops.exp(-ops.sum(offset * offset, axis=1)), 0.0)

        distance, point_index = obstacle
        near = (point_index >= 0) & (distance < w.d_threshold)
        nearest_points = np.zeros((n, 3))
        if near.any():
            nearest_points[near] = scene.obstacle_array[point_index[near]]
        clearance = ops.norm(p - nearest_points, axis=1)
        terms["obstacle"] = ops.where(near, clearance, 0.0)

        low, high = scene.bounds_array
        x_out = ops.relu(p[:, 0] - high[0]) + ops.relu(low[0] - p[:, 0])
        y_out = ops.relu(p[:, 1] - high[1]) + ops.relu(low[1] - p[:, 1])
        terms["out_of_map"] = x_out * x_out + y_out * y_out

        desired = nearest_reference_direction(p.data, scene.trajectory_array)
        speed = ops.norm(v, axis=1)
        moving = speed.data >= MIN_SPEED
        unit_v = v / ops.reshape(ops.where(moving, speed, 1.0), (n, 1))
        terms["ref_tracking"] = ops.where(moving, ops.norm(unit_v - desired, axis=1), 0.0)

        total = Tensor(np.zeros(n))
        for name in REWARD_TERMS:
            total = total + getattr(w, name) * terms[name]
        return RewardBreakdown(total=total, **terms)


# Default reward with the standard weights
reward_service = RewardService()
