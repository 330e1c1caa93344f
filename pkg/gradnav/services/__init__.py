from .dynamics import QuadrotorDynamics, dynamics
from .environment import NavigationEnv
from .renderer import GaussianRenderer
from .reward import RewardService, reward_service
from .scene_service import load_scene, make_gate_scene, save_scene

__all__ = [
    "QuadrotorDynamics",
    "dynamics",
    "NavigationEnv",
    "GaussianRenderer",
    "RewardService",
    "reward_service",
    "load_scene",
    "make_gate_scene",
    "save_scene",
]
