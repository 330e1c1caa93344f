"""
Backpropagation through time over whole episodes, without a critic.
"""
import logging
from typing import Dict

from gradnav.diffcore import clip_grad_norm
from gradnav.services.trainers.base import BaseTrainer
from gradnav.services.trainers.rollout import collect_window
from gradnav.services.trainers.shac import policy_loss

logger = logging.getLogger(__name__)


class BPTTTrainer(BaseTrainer):
    """Every epoch starts fresh episodes and differentiates the full episode return."""

    algo = "bptt"
    uses_critic = False

    def train_epoch(self, epoch: int) -> Dict[str, float]:
        tc = self.config
        self.env.reset()
        window = collect_window(self.env, self.agent, self.horizon, self.rng, differentiable=True)
        self.samples += window.steps

        self.actor_opt.zero_grad()
        loss = policy_loss(window, None, tc.gamma)
        self.require_finite("actor loss", loss.item())
        loss.backward()
        grad_norm = self.require_finite("actor gradient norm", clip_grad_norm(self.actor_opt.params.values(), tc.grad_norm))
        self.actor_opt.step()

        context = self.context_update(window)
        self.env.detach_state()

        stats = {
            "episodes": self._record_episodes(window.episode_returns),
            "step_reward": window.mean_step_reward(),
            "loss_actor": loss.item(),
            "grad_norm": grad_norm,
            "window_bytes": window.nbytes,
        }
        stats.update(context)
        return stats
