"""
Rollout window buffers shared by the trainers.
"""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from gradnav.diffcore import Tensor


def _nbytes(value) -> int:
    if value is None:
        return 0
    if isinstance(value, Tensor):
        return int(value.data.nbytes)
    if isinstance(value, np.ndarray):
        return int(value.nbytes)
    return 0


@dataclass
class RolloutWindow:
    """
    Per-step buffers of one h-step window over n environments.

    In differentiable mode ``rewards``, ``actions`` and ``next_priv`` stay on the
    tape, linking actions to states to rewards across the window. ``next_priv``
    and ``next_z`` describe s_{t+1}: the terminal state for done rows, the next
    window state otherwise.
    """

    obs: List[Tensor] = field(default_factory=list)
    priv: List[Tensor] = field(default_factory=list)
    history: List[np.ndarray] = field(default_factory=list)
    images: List[np.ndarray] = field(default_factory=list)
    embeddings: List[Tensor] = field(default_factory=list)
    latents: List[np.ndarray] = field(default_factory=list)
    actions: List[Tensor] = field(default_factory=list)
    log_probs: List[np.ndarray] = field(default_factory=list)
    rewards: List[Tensor] = field(default_factory=list)
    dones: List[np.ndarray] = field(default_factory=list)
    terminated: List[np.ndarray] = field(default_factory=list)
    truncated: List[np.ndarray] = field(default_factory=list)
    next_obs: List[np.ndarray] = field(default_factory=list)
    next_priv: List[Tensor] = field(default_factory=list)
    next_z: List[np.ndarray] = field(default_factory=list)
    episode_returns: List[float] = field(default_factory=list)
    differentiable: bool = True

    @property
    def horizon(self) -> int:
        return len(self.rewards)

    @property
    def n_envs(self) -> int:
        return int(self.rewards[0].shape[0]) if self.rewards else 0

    @property
    def steps(self) -> int:
        """Environment steps consumed by this window."""
        return self.horizon * self.n_envs

    @property
    def has_graph(self) -> bool:
        return any(r.requires_grad for r in self.rewards)

    @property
    def nbytes(self) -> int:
        """Bytes held by the window's buffers (tape intermediates not included)."""
        total = 0
        for name in (
            "obs", "priv", "history", "images", "embeddings", "latents", "actions", "log_probs",
            "rewards", "dones", "terminated", "truncated", "next_obs", "next_priv", "next_z",
        ):
            total += sum(_nbytes(item) for item in getattr(self, name))
        return total

    def reward_matrix(self) -> np.ndarray:
        return np.stack([r.data for r in self.rewards])

    def done_matrix(self) -> np.ndarray:
        return np.stack(self.dones)

    def terminated_matrix(self) -> np.ndarray:
        return np.stack(self.terminated)

    def stacked(self, name: str) -> np.ndarray:
        """Stack a per-step buffer to (h, n, ...), detached."""
        items = getattr(self, name)
        return np.stack([item.data if isinstance(item, Tensor) else item for item in items])

    def mean_step_reward(self) -> Optional[float]:
        if not self.rewards:
            return None
        return float(np.mean(self.reward_matrix()))
