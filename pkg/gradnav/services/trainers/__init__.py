"""
Trainers: short-horizon actor-critic (``gradnav``), BPTT and PPO.
"""
from pathlib import Path
from typing import Dict, Optional, Sequence, Type

from gradnav.core.config import Settings
from gradnav.models.scene import Scene
from gradnav.services.trainers.base import BaseTrainer, NonFiniteLossError, TrainResult, spawn_seeds, value_loss
from gradnav.services.trainers.bptt import BPTTTrainer
from gradnav.services.trainers.ppo import PPOTrainer, clipped_surrogate, compute_gae
from gradnav.services.trainers.rollout import collect_window
from gradnav.services.trainers.shac import GradNavTrainer, compute_td_lambda, policy_loss, td_lambda_targets

TRAINERS: Dict[str, Type[BaseTrainer]] = {
    "gradnav": GradNavTrainer,
    "bptt": BPTTTrainer,
    "ppo": PPOTrainer,
}


def make_trainer(settings: Settings, scenes: Sequence[Scene], run_dir: Optional[Path] = None) -> BaseTrainer:
    """Trainer for ``settings.train.algo``."""
    try:
        trainer_cls = TRAINERS[settings.train.algo]
    except KeyError:
        raise ValueError(f"unknown algorithm '{settings.train.algo}', expected one of {sorted(TRAINERS)}") from None
    return trainer_cls(settings, scenes, run_dir=run_dir)


def train_grad_nav(settings: Settings, scenes: Sequence[Scene], run_dir: Optional[Path] = None) -> TrainResult:
    return GradNavTrainer(settings, scenes, run_dir=run_dir).train()


def train_bptt(settings: Settings, scenes: Sequence[Scene], run_dir: Optional[Path] = None) -> TrainResult:
    return BPTTTrainer(settings, scenes, run_dir=run_dir).train()


def train_ppo(settings: Settings, scenes: Sequence[Scene], run_dir: Optional[Path] = None) -> TrainResult:
    return PPOTrainer(settings, scenes, run_dir=run_dir).train()


__all__ = [
    "TRAINERS",
    "BaseTrainer",
    "GradNavTrainer",
    "BPTTTrainer",
    "PPOTrainer",
    "TrainResult",
    "NonFiniteLossError",
    "make_trainer",
    "train_grad_nav",
    "train_bptt",
    "train_ppo",
    "collect_window",
    "policy_loss",
    "compute_td_lambda",
    "td_lambda_targets",
    "value_loss",
    "clipped_surrogate",
    "compute_gae",
    "spawn_seeds",
]
