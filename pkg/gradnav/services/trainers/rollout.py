"""
Window collection shared by the trainers.
"""
import logging

import numpy as np

from gradnav.diffcore import Tensor, no_grad, ops
from gradnav.models.rollout import RolloutWindow
from gradnav.services.environment import NavigationEnv
from gradnav.services.networks import NavigationAgent, PolicyNet

logger = logging.getLogger(__name__)


def _terminal_latents(agent: NavigationAgent, history: np.ndarray, images: np.ndarray, depth: np.ndarray) -> np.ndarray:
    e = agent.embed(agent.encoder_images(images, depth))
    return agent.latent(history, e)


def collect_window(
    env: NavigationEnv,
    agent: NavigationAgent,
    horizon: int,
    rng: np.random.Generator,
    differentiable: bool = True,
    sample_latent: bool = True,
    stochastic: bool = True,
) -> RolloutWindow:
    """
    Roll the agent for ``horizon`` steps in every environment.

    In differentiable mode actions are reparameterized samples (mean + sigma * eps)
    kept on the tape, so rewards and next states connect back to the policy
    parameters through the dynamics. Visual embeddings enter as leaf tensors
    whose gradients are later pushed into the encoder. Otherwise the rollout
    runs without a tape and records the behaviour log-probabilities.

    Args:
        env: environments to step (continuing from their current states)
        agent: networks
        horizon: window length h
        rng: source of action and latent noise
        differentiable: keep the graph (short-horizon actor-critic, BPTT)
        sample_latent: draw z from the context posterior instead of its mean
        stochastic: sample actions instead of using the mean

    Returns:
        The filled window
    """
    if horizon < 1:
        raise ValueError(f"horizon must be at least 1, got {horizon}")
    window = RolloutWindow(differentiable=differentiable)
    n = env.n_envs
    latent_dim = agent.config.latent_dim

    for t in range(horizon):
        current = env.reset_done()
        enc_images = agent.encoder_images(current.images, current.depth)
        e_values = agent.embed(enc_images)
        noise = rng.standard_normal((n, latent_dim)) if sample_latent else None
        z = agent.latent(current.history, e_values, noise)
        eps = rng.standard_normal((n, 4)) if stochastic else None

        if differentiable:
            e = Tensor(e_values, requires_grad=True, name=f"embedding.{t}")
            mean, log_std = agent.act(current.obs, z, e)
            actions = mean if eps is None else mean + ops.exp(log_std) * eps
            log_prob = PolicyNet.log_prob(actions.detach(), mean.detach(), log_std.detach()).data
            result = env.step(actions)
        else:
            e = Tensor(e_values)
            with no_grad():
                mean, log_std = agent.act(current.obs, z, e)
                sampled = mean.data if eps is None else mean.data + np.exp(log_std.data) * eps
                actions = Tensor(sampled)
                log_prob = PolicyNet.log_prob(actions, mean, log_std).data
                result = env.step(actions)

        window.obs.append(current.obs)
        window.priv.append(current.priv)
        window.history.append(current.history)
        window.images.append(enc_images)
        window.embeddings.append(e)
        window.latents.append(z)
        window.actions.append(actions)
        window.log_probs.append(log_prob)
        window.rewards.append(result.reward.total)
        window.dones.append(result.done)
        window.terminated.append(result.terminated)
        window.truncated.append(result.truncated)
        window.next_obs.append(result.obs.data.copy())
        window.next_priv.append(result.priv)
        window.episode_returns.extend(env.pop_completed())

        # z of s_{t+1}: computed here for rows whose next window state is not s_{t+1}
        boundary = np.ones(n, dtype=bool) if t == horizon - 1 else result.done
        next_z = np.zeros((n, latent_dim))
        if boundary.any():
            rows = np.flatnonzero(boundary)
            next_z[rows] = _terminal_latents(agent, result.history[rows], result.images[rows], result.depth[rows])
        window.next_z.append(next_z)

    for t in range(horizon - 1):
        continuing = ~window.dones[t]
        window.next_z[t][continuing] = window.latents[t + 1][continuing]

    logger.debug(
        f"Collected window h={horizon} n={n} (differentiable={differentiable}), "
        f"mean step reward {window.mean_step_reward():.4f}"
    )
    return window
