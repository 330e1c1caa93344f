"""
Short-horizon actor-critic through the differentiable simulator.

Each epoch rolls a window of h steps with the graph retained, minimizes the
negated discounted window return plus the bootstrapped terminal value by
backpropagating through the dynamics, then regresses the critic onto TD-lambda
targets and updates the context networks.
"""
import logging
from typing import Callable, Dict, Optional

import numpy as np

from gradnav.diffcore import Tensor, clip_grad_norm, no_grad, ops
from gradnav.models.rollout import RolloutWindow
from gradnav.services.trainers.base import BaseTrainer
from gradnav.services.trainers.rollout import collect_window

logger = logging.getLogger(__name__)

Critic = Callable[[Tensor, Tensor], Tensor]


def policy_loss(window: RolloutWindow, critic: Optional[Critic], gamma: float) -> Tensor:
    """
    Negative mean of the discounted window returns with terminal bootstrap.

    The discount restarts after an environment finishes inside the window.
    Early-terminated rows bootstrap with zero, truncated rows and the last
    window step with ``critic(s_next, z_next)``. The sum is normalized by
    ``n_envs * h``.

    Args:
        window: window collected with the graph retained
        critic: value function, or None for pure return maximization (BPTT)
        gamma: discount factor

    Raises:
        ValueError: if the window carries no graph
    """
    if not window.has_graph:
        raise ValueError("policy loss needs a window collected with the graph retained")
    h, n = window.horizon, window.n_envs
    reward_sum = Tensor(np.zeros(n))
    discount = np.ones(n)
    loss = Tensor(0.0)
    for t in range(h):
        done = window.dones[t]
        reward_sum = reward_sum + discount * window.rewards[t]
        ends = done | (t == h - 1)
        if ends.any():
            returns = reward_sum
            if critic is not None:
                value = critic(window.next_priv[t], Tensor(window.next_z[t]))
                value = ops.where(window.terminated[t], 0.0, value)
                returns = reward_sum + (gamma * discount) * value
            loss = loss - ops.sum(ops.where(ends, returns, 0.0))
        discount = np.where(done, 1.0, discount * gamma)
        reward_sum = ops.where(done, 0.0, reward_sum)
    return loss * (1.0 / (n * h))


def compute_td_lambda(
    rewards: np.ndarray,
    next_values: np.ndarray,
    dones: np.ndarray,
    gamma: float,
    lam: float,
) -> np.ndarray:
    """
    TD-lambda targets over an (h, n) window.

    ``next_values[t]`` is V(s_{t+1}) already zeroed for early-terminated rows.
    A finished row bootstraps from its own terminal value only; the last step
    bootstraps from the value after the window.
    """
    h = rewards.shape[0]
    targets = np.zeros_like(rewards, dtype=np.float64)
    following = np.zeros(rewards.shape[1])
    for t in reversed(range(h)):
        if t == h - 1:
            continuation = next_values[t]
        else:
            mixed = (1.0 - lam) * next_values[t] + lam * following
            continuation = np.where(dones[t], next_values[t], mixed)
        following = rewards[t] + gamma * continuation
        targets[t] = following
    return targets


def td_lambda_targets(window: RolloutWindow, critic: Critic, gamma: float, lam: float) -> np.ndarray:
    """Detached TD-lambda value targets (h, n) for a collected window."""
    h, n = window.horizon, window.n_envs
    with no_grad():
        states = Tensor(window.stacked("next_priv").reshape(h * n, -1))
        z = Tensor(np.concatenate(window.next_z, axis=0))
        next_values = critic(states, z).data.reshape(h, n)
    next_values = np.where(window.terminated_matrix(), 0.0, next_values)
    return compute_td_lambda(window.reward_matrix(), next_values, window.done_matrix(), gamma, lam)


class GradNavTrainer(BaseTrainer):
    """Short-horizon actor-critic with a target critic and joint context training."""

    algo = "gradnav"

    def train_epoch(self, epoch: int) -> Dict[str, float]:
        tc = self.config
        agent = self.agent
        window = collect_window(self.env, agent, self.horizon, self.rng, differentiable=True)
        self.samples += window.steps

        self.actor_opt.zero_grad()
        loss = policy_loss(window, agent.target_critic, tc.gamma)
        self.require_finite("actor loss", loss.item())
        loss.backward()
        agent.target_critic.zero_grad()
        grad_norm = self.require_finite("actor gradient norm", clip_grad_norm(self.actor_opt.params.values(), tc.grad_norm))
        self.actor_opt.step()

        targets = td_lambda_targets(window, agent.target_critic, tc.gamma, tc.lam)
        h, n = window.horizon, window.n_envs
        critic_loss = self.fit_critic(
            window.stacked("priv").reshape(h * n, -1),
            np.concatenate(window.latents, axis=0),
            targets.reshape(h * n),
        )
        agent.soft_update_target(tc.target_critic_alpha)

        context = self.context_update(window)
        self.env.detach_state()

        stats = {
            "episodes": self._record_episodes(window.episode_returns),
            "step_reward": window.mean_step_reward(),
            "loss_actor": loss.item(),
            "loss_critic": critic_loss,
            "grad_norm": grad_norm,
            "window_bytes": window.nbytes,
        }
        stats.update(context)
        return stats
