"""
Differentiable quadrotor dynamics.

One step applies first-order delay filters to the commands, a PD body-rate loop,
rigid-body rotation with gyroscopic coupling, quaternion integration, and
collective thrust with linear drag, integrated by semi-implicit Euler. Every
operation is elementwise over the batch, so a batch of n drones produces the
same numbers as n single-drone steps.
"""
import logging
from typing import Tuple

import numpy as np

from gradnav.diffcore import Tensor, ops
from gradnav.diffcore.ops import TensorLike
from gradnav.models.drone import ControlInput, DelayRegisters, DroneParams, DroneState
from gradnav.schemas.config import DynamicsConfig, RandomizationRanges

logger = logging.getLogger(__name__)


def _components(q: Tensor) -> Tuple[Tensor, Tensor, Tensor, Tensor]:
    return q[..., 0], q[..., 1], q[..., 2], q[..., 3]


def rotation_matrix(q: TensorLike) -> Tensor:
    """
    Body-to-world rotation of scalar-first unit quaternions.

    Args:
        q: (..., 4) quaternions, unit length within 1e-6

    Returns:
        (..., 3, 3) rotation matrices, differentiable in ``q``

    Raises:
        ValueError: on a zero quaternion
    """
    q = ops.as_tensor(q)
    norms = np.linalg.norm(q.data, axis=-1)
    if np.any(norms == 0.0):
        raise ValueError("rotation_matrix: zero quaternion")
    w, x, y, z = _components(q)
    entries = [
        1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y),
    ]
    return ops.reshape(ops.stack(entries, axis=-1), q.shape[:-1] + (3, 3))


def body_z_axis(q: Tensor) -> Tensor:
    """Third column of R(q): the thrust direction in world coordinates."""
    w, x, y, z = _components(q)
    return ops.stack([2.0 * (x * z + w * y), 2.0 * (y * z - w * x), 1.0 - 2.0 * (x * x + y * y)], axis=-1)


def body_x_axis(q: Tensor) -> Tensor:
    """First column of R(q): the heading direction in world coordinates."""
    w, x, y, z = _components(q)
    return ops.stack([1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y + w * z), 2.0 * (x * z - w * y)], axis=-1)


def quat_from_euler(roll: np.ndarray, pitch: np.ndarray, yaw: np.ndarray) -> np.ndarray:
    """Scalar-first quaternions for ZYX Euler angles (yaw, then pitch, then roll)."""
    cr, sr = np.cos(roll / 2.0), np.sin(roll / 2.0)
    cp, sp = np.cos(pitch / 2.0), np.sin(pitch / 2.0)
    cy, sy = np.cos(yaw / 2.0), np.sin(yaw / 2.0)
    return np.stack(
        [
            cr * cp * cy + sr * sp * sy,
            sr * cp * cy - cr * sp * sy,
            cr * sp * cy + sr * cp * sy,
            cr * cp * sy - sr * sp * cy,
        ],
        axis=-1,
    )


def _check_finite(name: str, values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)):
        raise ValueError(f"dynamics step: non-finite values in {name}")


class QuadrotorDynamics:
    """
    Batched quadrotor simulator.

    Holds the fixed attitude-loop gains and gravity; everything that varies per
    drone lives in ``DroneParams``.
    """

    def __init__(self, config: DynamicsConfig = None):
        self.config = config or DynamicsConfig()

    def step(
        self,
        state: DroneState,
        u: ControlInput,
        params: DroneParams,
        delayed: DelayRegisters,
        dt: float,
    ) -> Tuple[DroneState, DelayRegisters]:
        """
        Advance every drone by ``dt`` seconds.

        Args:
            state: current states
            u: desired body rates and normalized thrust (clamped to [0, 1])
            params: physical parameters per drone
            delayed: filtered commands and previous angular acceleration
            dt: step length in seconds

        Returns:
            Next states and updated delay registers

        Raises:
            ValueError: if ``dt`` is not positive or any input is non-finite
        """
        if not dt > 0:
            raise ValueError(f"dynamics step: dt must be positive, got {dt}")
        _check_finite("state", state.numpy())
        _check_finite("w_d", u.w_d.data)
        _check_finite("c", u.c.data)
        _check_finite("delay registers", np.concatenate(
            [delayed.w_tilde.data, delayed.c_tilde.data[:, None], delayed.w_dot_prev.data], axis=1
        ))

        c = ops.clamp(u.c, 0.0, 1.0)
        k_rate = params.k_rate[:, None]
        w_tilde = delayed.w_tilde + k_rate * (u.w_d - delayed.w_tilde)
        c_tilde = delayed.c_tilde + params.k_motor * (c - delayed.c_tilde)

        torque = params.kp * (w_tilde - state.w) - params.kd * delayed.w_dot_prev
        inertia = params.inertia
        w_dot = (torque - ops.cross(state.w, inertia * state.w)) / inertia
        w = state.w + dt * w_dot

        n = state.n
        omega_quat = ops.concat([Tensor(np.zeros((n, 1))), w], axis=1)
        q = ops.normalize(state.q + (0.5 * dt) * ops.quat_mul(state.q, omega_quat), axis=-1)

        thrust_per_mass = c_tilde * (params.max_thrust / params.mass)
        drag_per_mass = (params.k_drag / params.mass)[:, None]
        a = body_z_axis(q) * ops.reshape(thrust_per_mass, (n, 1)) + params.gravity - drag_per_mass * state.v
        v = state.v + dt * a
        p = state.p + dt * v

        return DroneState(p=p, q=q, v=v, w=w, a=a), DelayRegisters(w_tilde, c_tilde, w_dot)

    def sample_params(self, ranges: RandomizationRanges, rng: np.random.Generator, n: int) -> DroneParams:
        """
        Draw n independent parameter sets uniformly within ``ranges``.

        Draw order is fixed so a seeded generator always yields the same batch.
        """
        if n < 1:
            raise ValueError(f"sample_params: n must be at least 1, got {n}")

        def draw(interval):
            low, high = interval
            return rng.uniform(low, high, size=n)

        mass = draw(ranges.mass)
        max_thrust = draw(ranges.max_thrust)
        inertia = np.stack([draw(ranges.inertia_xy), draw(ranges.inertia_xy), draw(ranges.inertia_z)], axis=1)
        k_motor = draw(ranges.motor_delay)
        k_rate = draw(ranges.rate_delay)
        k_drag = draw(ranges.drag)
        return DroneParams(
            mass=mass,
            inertia=inertia,
            max_thrust=max_thrust,
            k_motor=k_motor,
            k_rate=k_rate,
            k_drag=k_drag,
            kp=np.asarray(self.config.kp, dtype=np.float64),
            kd=np.asarray(self.config.kd, dtype=np.float64),
            gravity=np.asarray(self.config.gravity, dtype=np.float64),
        )


# Default simulator with the configured gains
dynamics = QuadrotorDynamics()
