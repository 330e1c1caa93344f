"""
Adam optimizer and global-norm gradient clipping.
"""
import logging
from typing import Dict, Iterable, Mapping, Tuple

import numpy as np

from gradnav.diffcore.tensor import Tensor

logger = logging.getLogger(__name__)


def clip_grad_norm(params: Iterable[Tensor], max_norm: float) -> float:
    """
    Scale gradients in place so their global L2 norm is at most ``max_norm``.

    Returns:
        The norm before clipping.
    """
    tensors = [p for p in params if p.grad is not None]
    total = float(np.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in tensors)))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-6)
        for p in tensors:
            p.grad = p.grad * scale
    return total


class Adam:
    """
    Adam over a named parameter group.

    The group keeps its configured initial learning rate so a curriculum
    transition can restore it with ``reset_lr``.
    """

    def __init__(
        self,
        params: Mapping[str, Tensor],
        lr: float,
        betas: Tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        name: str = "adam",
    ):
        if lr <= 0:
            raise ValueError(f"{name}: learning rate must be positive, got {lr}")
        self.params: Dict[str, Tensor] = dict(params)
        self.initial_lr = float(lr)
        self.lr = float(lr)
        self.betas = betas
        self.eps = eps
        self.name = name
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> None:
        self.step_count += 1
        beta1, beta2 = self.betas
        correction1 = 1.0 - beta1 ** self.step_count
        correction2 = 1.0 - beta2 ** self.step_count
        for key, p in self.params.items():
            if p.grad is None:
                continue
            self.m[key] = beta1 * self.m[key] + (1.0 - beta1) * p.grad
            self.v[key] = beta2 * self.v[key] + (1.0 - beta2) * p.grad * p.grad
            m_hat = self.m[key] / correction1
            v_hat = self.v[key] / correction2
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def reset_lr(self) -> None:
        self.lr = self.initial_lr
        logger.info(f"{self.name}: learning rate reset to {self.lr:g}")

    def scale_lr(self, factor: float) -> None:
        self.lr *= factor
        logger.warning(f"{self.name}: learning rate scaled by {factor:g} to {self.lr:g}")

    def state_dict(self) -> Dict[str, np.ndarray]:
        state: Dict[str, np.ndarray] = {
            "lr": np.array([self.lr]),
            "initial_lr": np.array([self.initial_lr]),
            "step_count": np.array([float(self.step_count)]),
        }
        for key in self.params:
            state[f"m.{key}"] = self.m[key].copy()
            state[f"v.{key}"] = self.v[key].copy()
        return state

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        self.lr = float(state["lr"][0])
        self.initial_lr = float(state["initial_lr"][0])
        self.step_count = int(state["step_count"][0])
        for key in self.params:
            self.m[key] = np.array(state[f"m.{key}"], dtype=np.float64)
            self.v[key] = np.array(state[f"v.{key}"], dtype=np.float64)
