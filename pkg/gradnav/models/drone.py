"""
Drone state, control input, physical parameters and delay registers.

All types are batched along the first axis. States and registers hold Tensors
so a rollout keeps its graph; parameters are plain arrays (never differentiated).
"""
from dataclasses import dataclass, fields, replace
from typing import Sequence

import numpy as np

from gradnav.diffcore import Tensor, ops

STATE_DIM = 16


def _select(mask: np.ndarray, fresh: Tensor, current: Tensor) -> Tensor:
    cond = mask.reshape((-1,) + (1,) * (current.ndim - 1))
    return ops.where(cond, fresh, current)


@dataclass
class DroneState:
    """Batched rigid-body state: p (n,3), q (n,4) scalar-first, v (n,3), w (n,3), a (n,3)."""

    p: Tensor
    q: Tensor
    v: Tensor
    w: Tensor
    a: Tensor

    @property
    def n(self) -> int:
        return self.p.shape[0]

    @classmethod
    def from_array(cls, values: np.ndarray) -> "DroneState":
        """Build from an (n, 16) array laid out as [p, q, v, w, a]."""
        data = np.atleast_2d(np.asarray(values, dtype=np.float64))
        if data.shape[1] != STATE_DIM:
            raise ValueError(f"state array needs {STATE_DIM} columns, got {data.shape[1]}")
        return cls(
            p=Tensor(data[:, 0:3]),
            q=Tensor(data[:, 3:7]),
            v=Tensor(data[:, 7:10]),
            w=Tensor(data[:, 10:13]),
            a=Tensor(data[:, 13:16]),
        )

    @classmethod
    def hover(cls, n: int, position: Sequence[float] = (0.0, 0.0, 1.3)) -> "DroneState":
        values = np.zeros((n, STATE_DIM))
        values[:, 0:3] = position
        values[:, 3] = 1.0
        return cls.from_array(values)

    def numpy(self) -> np.ndarray:
        return np.concatenate([self.p.data, self.q.data, self.v.data, self.w.data, self.a.data], axis=1)

    def detach(self) -> "DroneState":
        return DroneState(*(getattr(self, f.name).detach() for f in fields(self)))

    def select(self, mask: np.ndarray, fresh: "DroneState") -> "DroneState":
        """Rows where ``mask`` holds come from ``fresh``; the rest keep their graph."""
        return DroneState(*(_select(mask, getattr(fresh, f.name), getattr(self, f.name)) for f in fields(self)))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.numpy())))


@dataclass
class ControlInput:
    """Desired body rates w_d (n,3) in rad/s and normalized thrust c (n,)."""

    w_d: Tensor
    c: Tensor


@dataclass
class DelayRegisters:
    """Filtered commands and the previous angular acceleration, carried between steps."""

    w_tilde: Tensor
    c_tilde: Tensor
    w_dot_prev: Tensor

    @classmethod
    def initial(cls, n: int, thrust: float) -> "DelayRegisters":
        return cls(
            w_tilde=Tensor(np.zeros((n, 3))),
            c_tilde=Tensor(np.full(n, float(thrust))),
            w_dot_prev=Tensor(np.zeros((n, 3))),
        )

    def detach(self) -> "DelayRegisters":
        return DelayRegisters(self.w_tilde.detach(), self.c_tilde.detach(), self.w_dot_prev.detach())

    def select(self, mask: np.ndarray, fresh: "DelayRegisters") -> "DelayRegisters":
        return DelayRegisters(
            _select(mask, fresh.w_tilde, self.w_tilde),
            _select(mask, fresh.c_tilde, self.c_tilde),
            _select(mask, fresh.w_dot_prev, self.w_dot_prev),
        )


@dataclass
class DroneParams:
    """
    Batched physical parameters.

    Attributes:
        mass: (n,) kg
        inertia: (n, 3) diagonal Ix, Iy, Iz in kg*m^2
        max_thrust: (n,) N
        k_motor: (n,) thrust delay factor in (0, 1]
        k_rate: (n,) body-rate delay factor in (0, 1]
        k_drag: (n,) linear drag coefficient
        kp, kd: (3,) diagonal attitude-loop gains
        gravity: (3,) world gravity vector
    """

    mass: np.ndarray
    inertia: np.ndarray
    max_thrust: np.ndarray
    k_motor: np.ndarray
    k_rate: np.ndarray
    k_drag: np.ndarray
    kp: np.ndarray
    kd: np.ndarray
    gravity: np.ndarray

    def __post_init__(self):
        if np.any(self.mass <= 0) or np.any(self.inertia <= 0) or np.any(self.max_thrust <= 0):
            raise ValueError("mass, inertia and max_thrust must be positive")
        for name in ("k_motor", "k_rate"):
            values = getattr(self, name)
            if np.any(values <= 0) or np.any(values > 1):
                raise ValueError(f"{name} must lie in (0, 1]")

    @property
    def n(self) -> int:
        return int(self.mass.shape[0])

    @property
    def hover_thrust(self) -> np.ndarray:
        """Normalized thrust that balances gravity, per drone."""
        return self.mass * abs(float(self.gravity[2])) / self.max_thrust

    @classmethod
    def nominal(
        cls,
        n: int,
        mass: float = 1.25,
        inertia: Sequence[float] = (0.1, 0.1, 0.2),
        max_thrust: float = 26.0,
        k_motor: float = 1.0,
        k_rate: float = 1.0,
        k_drag: float = 0.0,
        kp: Sequence[float] = (1.0, 1.0, 2.0),
        kd: Sequence[float] = (0.01, 0.01, 0.02),
        gravity: Sequence[float] = (0.0, 0.0, -9.81),
    ) -> "DroneParams":
        """Identical drones; handy for tests and scripted tools."""
        return cls(
            mass=np.full(n, float(mass)),
            inertia=np.tile(np.asarray(inertia, dtype=np.float64), (n, 1)),
            max_thrust=np.full(n, float(max_thrust)),
            k_motor=np.full(n, float(k_motor)),
            k_rate=np.full(n, float(k_rate)),
            k_drag=np.full(n, float(k_drag)),
            kp=np.asarray(kp, dtype=np.float64),
            kd=np.asarray(kd, dtype=np.float64),
            gravity=np.asarray(gravity, dtype=np.float64),
        )

    def scatter(self, rows: np.ndarray, fresh: "DroneParams") -> "DroneParams":
        """Copy with ``rows`` (integer indices) overwritten by the rows of ``fresh``, in order."""
        if len(rows) != fresh.n:
            raise ValueError(f"scatter: {len(rows)} rows but {fresh.n} fresh parameter sets")
        merged = {}
        for name in ("mass", "inertia", "max_thrust", "k_motor", "k_rate", "k_drag"):
            current = getattr(self, name).copy()
            current[rows] = getattr(fresh, name)
            merged[name] = current
        return replace(self, **merged)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name).tolist() for f in fields(self)}
