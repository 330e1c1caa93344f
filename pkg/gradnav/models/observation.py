"""
Observation layout, reward breakdown and termination flags.
"""
from dataclasses import dataclass, fields
from typing import Dict, Optional

import numpy as np

from gradnav.diffcore import Tensor

OBS_DIM = 16
DEPTH_PRIOR_DIM = 24
PRIV_DIM = OBS_DIM + 3 + DEPTH_PRIOR_DIM
HISTORY_LENGTH = 5

# Column slices of the 16-dim onboard observation [h, q, v, a_t, a_{t-1}].
OBS_HEIGHT = slice(0, 1)
OBS_QUAT = slice(1, 5)
OBS_VELOCITY = slice(5, 8)
OBS_ACTION = slice(8, 12)
OBS_PREV_ACTION = slice(12, 16)

REWARD_TERMS = (
    "survival",
    "linear_velocity",
    "pose",
    "height",
    "action",
    "action_rate",
    "smoothness",
    "yaw_alignment",
    "waypoint",
    "obstacle",
    "out_of_map",
    "ref_tracking",
)


@dataclass
class RewardBreakdown:
    """Per-term reward components (n,) and their weighted total."""

    survival: Tensor
    linear_velocity: Tensor
    pose: Tensor
    height: Tensor
    action: Tensor
    action_rate: Tensor
    smoothness: Tensor
    yaw_alignment: Tensor
    waypoint: Tensor
    obstacle: Tensor
    out_of_map: Tensor
    ref_tracking: Tensor
    total: Tensor

    def components(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name).data for name in REWARD_TERMS}

    def means(self) -> Dict[str, float]:
        return {f"reward_{f.name}": float(np.mean(getattr(self, f.name).data)) for f in fields(self)}


@dataclass
class TerminationFlags:
    """Early-termination reasons per environment."""

    ceiling_exceeded: np.ndarray
    speed_exceeded: np.ndarray
    out_of_bounds: np.ndarray
    fault: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.fault is None:
            self.fault = np.zeros_like(self.ceiling_exceeded, dtype=bool)

    @property
    def any(self) -> np.ndarray:
        return self.ceiling_exceeded | self.speed_exceeded | self.out_of_bounds | self.fault

    def to_dict(self) -> Dict[str, np.ndarray]:
        return {
            "ceiling_exceeded": self.ceiling_exceeded,
            "speed_exceeded": self.speed_exceeded,
            "out_of_bounds": self.out_of_bounds,
            "fault": self.fault,
        }


@dataclass
class StepResult:
    """
    Output of one environment step.

    ``obs``/``priv``/``images`` describe the state reached by the step, which is
    the terminal state for rows that are done. ``history`` is the CENet
    observation history (n, 5*16) including that state.
    """

    obs: Tensor
    priv: Tensor
    images: np.ndarray
    depth: np.ndarray
    history: np.ndarray
    reward: RewardBreakdown
    done: np.ndarray
    terminated: np.ndarray
    truncated: np.ndarray
    flags: TerminationFlags
    obstacle_distance: np.ndarray


@dataclass
class EnvObservation:
    """What the policy side sees after a reset: observations, critic input, camera, history."""

    obs: Tensor
    priv: Tensor
    images: np.ndarray
    depth: np.ndarray
    history: np.ndarray
