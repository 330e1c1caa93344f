from gradnav.models.drone import ControlInput, DelayRegisters, DroneParams, DroneState
from gradnav.models.observation import (
    EnvObservation,
    RewardBreakdown,
    StepResult,
    TerminationFlags,
)
from gradnav.models.rollout import RolloutWindow
from gradnav.models.scene import Camera, Gaussian, Scene

__all__ = [
    "DroneState",
    "DroneParams",
    "ControlInput",
    "DelayRegisters",
    "Gaussian",
    "Scene",
    "Camera",
    "RewardBreakdown",
    "TerminationFlags",
    "StepResult",
    "EnvObservation",
    "RolloutWindow",
]
