"""
Clipped-surrogate PPO on the same networks and observation interface.

Rollouts run without a tape; the policy sees the CENet posterior mean as z
and detached visual embeddings, so the encoder is trained by the CENet loss only.
"""
import logging
from typing import Dict

import numpy as np

from gradnav.diffcore import Tensor, clip_grad_norm, no_grad, ops
from gradnav.services.networks import PolicyNet
from gradnav.services.trainers.base import BaseTrainer, value_loss
from gradnav.services.trainers.rollout import collect_window

logger = logging.getLogger(__name__)


def clipped_surrogate(ratio: Tensor, advantages: np.ndarray, clip: float) -> Tensor:
    """Per-sample min(r * A, clip(r, 1 - eps, 1 + eps) * A)."""
    advantages = np.asarray(advantages, dtype=np.float64)
    unclipped = ratio * advantages
    clipped = ops.clamp(ratio, 1.0 - clip, 1.0 + clip) * advantages
    return ops.minimum(unclipped, clipped)


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    next_values: np.ndarray,
    dones: np.ndarray,
    gamma: float,
    lam: float,
) -> np.ndarray:
    """
    Generalized advantage estimates over an (h, n) window.

    ``next_values[t]`` is V(s_{t+1}), zero where the episode terminated early;
    accumulation stops at episode ends.
    """
    advantages = np.zeros_like(rewards, dtype=np.float64)
    running = np.zeros(rewards.shape[1])
    for t in reversed(range(rewards.shape[0])):
        delta = rewards[t] + gamma * next_values[t] - values[t]
        running = delta + gamma * lam * np.where(dones[t], 0.0, running)
        advantages[t] = running
    return advantages


class PPOTrainer(BaseTrainer):
    algo = "ppo"

    def train_epoch(self, epoch: int) -> Dict[str, float]:
        tc = self.config
        agent = self.agent
        window = collect_window(self.env, agent, self.horizon, self.rng, differentiable=False, sample_latent=False)
        self.samples += window.steps
        h, n = window.horizon, window.n_envs
        count = h * n

        priv = window.stacked("priv").reshape(count, -1)
        latents = np.concatenate(window.latents, axis=0)
        with no_grad():
            values = agent.critic(Tensor(priv), Tensor(latents)).data.reshape(h, n)
            next_values = agent.critic(
                Tensor(window.stacked("next_priv").reshape(count, -1)),
                Tensor(np.concatenate(window.next_z, axis=0)),
            ).data.reshape(h, n)
        next_values = np.where(window.terminated_matrix(), 0.0, next_values)
        advantages = compute_gae(window.reward_matrix(), values, next_values, window.done_matrix(), tc.gamma, tc.lam)
        returns = (advantages + values).reshape(count)
        advantages = advantages.reshape(count)
        if tc.ppo_normalize_advantages:
            advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)

        obs = window.stacked("obs").reshape(count, -1)
        embeddings = window.stacked("embeddings").reshape(count, -1)
        actions = window.stacked("actions").reshape(count, -1)
        old_log_probs = np.concatenate(window.log_probs, axis=0)

        actor_losses, critic_losses, grad_norms = [], [], []
        batches = max(1, min(tc.ppo_minibatches, count))
        for _ in range(tc.ppo_epochs):
            for rows in np.array_split(self.rng.permutation(count), batches):
                self.actor_opt.zero_grad()
                mean, log_std = agent.act(Tensor(obs[rows]), latents[rows], Tensor(embeddings[rows]))
                log_prob = PolicyNet.log_prob(Tensor(actions[rows]), mean, log_std)
                ratio = ops.exp(log_prob - old_log_probs[rows])
                surrogate = ops.mean(clipped_surrogate(ratio, advantages[rows], tc.ppo_clip))
                loss = -surrogate - tc.ppo_entropy * PolicyNet.entropy(log_std)
                self.require_finite("actor loss", loss.item())
                loss.backward()
                grad_norms.append(self.require_finite(
                    "actor gradient norm", clip_grad_norm(self.actor_opt.params.values(), tc.grad_norm)
                ))
                self.actor_opt.step()
                actor_losses.append(loss.item())

                self.critic_opt.zero_grad()
                closs = value_loss(agent.critic, Tensor(priv[rows]), Tensor(latents[rows]), returns[rows])
                self.require_finite("critic loss", closs.item())
                closs.backward()
                clip_grad_norm(self.critic_opt.params.values(), tc.grad_norm)
                self.critic_opt.step()
                critic_losses.append(closs.item())

        context = self.context_update(window)
        self.env.detach_state()

        stats = {
            "episodes": self._record_episodes(window.episode_returns),
            "step_reward": window.mean_step_reward(),
            "loss_actor": float(np.mean(actor_losses)),
            "loss_critic": float(np.mean(critic_losses)),
            "grad_norm": float(np.mean(grad_norms)),
            "window_bytes": window.nbytes,
        }
        stats.update(context)
        return stats
