"""
Training loop shared by the short-horizon actor-critic, BPTT and PPO trainers.

A trainer owns one environment batch, one agent and three Adam groups
(actor, critic, context = CENet + visual encoder). Per epoch it runs the
algorithm-specific update, appends a row to ``metrics.csv`` (deterministic
columns only) and ``timing.csv`` (wall clock), applies the curriculum, and
writes ``checkpoints/best`` and ``checkpoints/last``.
"""
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from gradnav.core.config import Settings, dump_settings
from gradnav.diffcore import Adam, Tensor, clip_grad_norm, ops
from gradnav.models.rollout import RolloutWindow
from gradnav.models.scene import Scene
from gradnav.services.checkpoint import load_checkpoint, save_checkpoint
from gradnav.services.curriculum import CurriculumSchedule
from gradnav.services.environment import NavigationEnv
from gradnav.services.networks import NavigationAgent, ValueNet, cenet_loss
from gradnav.utils.io import append_csv, read_csv

logger = logging.getLogger(__name__)

OPTIMIZER_GROUPS = ("actor", "critic", "context")


class NonFiniteLossError(RuntimeError):
    """Raised inside an epoch when a loss or gradient norm is not finite."""


@dataclass
class TrainResult:
    run_dir: Path
    metrics: pd.DataFrame
    best_reward: float
    best_checkpoint: Optional[Path]
    last_checkpoint: Path


def spawn_seeds(seed: int, count: int) -> List[int]:
    """Independent child seeds (environment, networks, sampling, ...) from one run seed."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1)[0]) for child in children]


def value_loss(critic: ValueNet, states: Tensor, z: Tensor, targets: np.ndarray) -> Tensor:
    """Mean squared error between V(s, z) and detached targets."""
    diff = critic(states, z) - np.asarray(targets, dtype=np.float64)
    return ops.mean(diff * diff)


def _finite_mean(values: Sequence[float]) -> float:
    return float(np.mean(values)) if len(values) else float("nan")


class BaseTrainer:
    """Epoch loop, bookkeeping and the updates every algorithm shares."""

    algo = "base"
    uses_critic = True

    def __init__(
        self,
        settings: Settings,
        scenes: Sequence[Scene],
        run_dir: Optional[Path] = None,
        agent: Optional[NavigationAgent] = None,
        env: Optional[NavigationEnv] = None,
    ):
        if not scenes:
            raise ValueError("at least one scene is required for training")
        if settings.train.algo != self.algo:
            settings = settings.model_copy(update={"train": settings.train.model_copy(update={"algo": self.algo})})
        self.settings = settings
        self.config = settings.train
        self.scenes = list(scenes)
        self.horizon = settings.horizon
        self.n_envs = settings.n_envs

        env_seed, net_seed, sample_seed = spawn_seeds(settings.seed, 3)
        self.agent = agent or NavigationAgent(settings.net, settings.camera, seed=net_seed)
        self.env = env or NavigationEnv.from_settings(settings, self.scenes[0], n_envs=self.n_envs, seed=env_seed)
        self.rng = np.random.default_rng(sample_seed)

        tc = self.config
        self.actor_opt = Adam(self.agent.actor_parameters(), tc.actor_lr, tc.adam_betas, tc.adam_eps, name="actor")
        self.critic_opt = Adam(self.agent.critic_parameters(), tc.critic_lr, tc.adam_betas, tc.adam_eps, name="critic")
        self.context_opt = Adam(self.agent.context_parameters(), tc.cenet_lr, tc.adam_betas, tc.adam_eps, name="context")

        self.schedule: Optional[CurriculumSchedule] = None
        if settings.curriculum.enabled:
            self.schedule = CurriculumSchedule.from_config(settings.curriculum, len(self.scenes))
        self.epochs = self.schedule.total_epochs if self.schedule else tc.epochs

        self.run_dir = Path(run_dir) if run_dir else Path(settings.output_dir) / f"{self.algo}_seed{settings.seed}"
        self.scene_index = 0
        self.samples = 0
        self.episode_reward = float("nan")
        self.episode_reward_std = float("nan")
        self.best_reward = -math.inf
        self.best_checkpoint: Optional[Path] = None
        self._snapshot: Optional[Dict[str, Any]] = None

    # ----------------------------------------------------------- optimizers
    def optimizers(self) -> Dict[str, Adam]:
        return {"actor": self.actor_opt, "critic": self.critic_opt, "context": self.context_opt}

    def optimizer_state(self) -> Dict[str, np.ndarray]:
        state = {}
        for group, opt in self.optimizers().items():
            state.update({f"{group}.{k}": v for k, v in opt.state_dict().items()})
        return state

    def load_optimizer_state(self, state: Dict[str, np.ndarray]) -> None:
        for group, opt in self.optimizers().items():
            prefix = f"{group}."
            opt.load_state_dict({k[len(prefix):]: v for k, v in state.items() if k.startswith(prefix)})

    def _take_snapshot(self) -> None:
        self._snapshot = {"agent": self.agent.state_dict(), "optimizers": self.optimizer_state()}

    def _restore_snapshot(self) -> None:
        if self._snapshot is None:
            return
        # weights and moments roll back; learning rates keep their current value
        current = {group: opt.lr for group, opt in self.optimizers().items()}
        self.agent.load_state_dict(self._snapshot["agent"])
        self.load_optimizer_state(self._snapshot["optimizers"])
        for group, opt in self.optimizers().items():
            opt.lr = current[group]

    @staticmethod
    def require_finite(name: str, value: float) -> float:
        if not np.isfinite(value):
            raise NonFiniteLossError(f"{name} is not finite ({value})")
        return value

    # ------------------------------------------------------------ shared updates
    def fit_critic(self, states: np.ndarray, z: np.ndarray, targets: np.ndarray) -> float:
        """
        ``critic_iterations`` passes of shuffled minibatch regression onto fixed targets.

        Returns:
            Mean minibatch loss of the last pass
        """
        tc = self.config
        critic = self.agent.critic
        count = states.shape[0]
        batches = max(1, min(tc.critic_minibatches, count))
        last_pass: List[float] = []
        for _ in range(tc.critic_iterations):
            last_pass = []
            for rows in np.array_split(self.rng.permutation(count), batches):
                self.critic_opt.zero_grad()
                loss = value_loss(critic, Tensor(states[rows]), Tensor(z[rows]), targets[rows])
                self.require_finite("critic loss", loss.item())
                loss.backward()
                clip_grad_norm(self.critic_opt.params.values(), tc.grad_norm)
                self.critic_opt.step()
                last_pass.append(loss.item())
        return _finite_mean(last_pass)

    def context_update(self, window: RolloutWindow) -> Dict[str, float]:
        """
        One step on the CENet + visual encoder group.

        Embedding gradients left by the actor backward pass are pushed into the
        encoder by re-running it in chunks on the stored images; the CENet loss
        is evaluated on a random minibatch of the window with fresh embeddings,
        so it trains the encoder as well.
        """
        tc = self.config
        agent = self.agent
        chunk = tc.encoder_chunk
        self.context_opt.zero_grad()
        images = np.concatenate(window.images, axis=0)

        grads = [e.grad for e in window.embeddings]
        if window.differentiable and any(g is not None and np.any(g) for g in grads):
            upstream = np.concatenate(
                [g if g is not None else np.zeros(e.shape) for g, e in zip(grads, window.embeddings)], axis=0
            )
            for start in range(0, images.shape[0], chunk):
                e = agent.encoder(images[start:start + chunk])
                ops.sum(e * upstream[start:start + chunk]).backward()

        losses = {"loss_cenet": float("nan"), "cenet_mse": float("nan"), "cenet_kl": float("nan")}
        if agent.config.ablation != "no_cenet":
            history = np.concatenate(window.history, axis=0)
            next_obs = np.concatenate(window.next_obs, axis=0)
            total = history.shape[0]
            batch = min(tc.cenet_batch_size, total)
            rows = np.sort(self.rng.choice(total, size=batch, replace=False))
            noise = self.rng.standard_normal((batch, agent.config.latent_dim))
            sums = np.zeros(3)
            for start in range(0, batch, chunk):
                sel = rows[start:start + chunk]
                weight = len(sel) / batch
                e = agent.encoder(images[sel])
                loss, mse, kl = cenet_loss(
                    agent.cenet, Tensor(history[sel]), e, Tensor(next_obs[sel]), agent.config.beta,
                    noise[start:start + chunk],
                )
                self.require_finite("CENet loss", loss.item())
                (loss * weight).backward()
                sums += weight * np.array([loss.item(), mse.item(), kl.item()])
            losses = {"loss_cenet": sums[0], "cenet_mse": sums[1], "cenet_kl": sums[2]}

        clip_grad_norm(self.context_opt.params.values(), tc.grad_norm)
        self.context_opt.step()
        return losses

    # ----------------------------------------------------------------- loop
    def train_epoch(self, epoch: int) -> Dict[str, float]:
        raise NotImplementedError

    def _curriculum_hook(self, epoch: int) -> Tuple[int, bool]:
        if self.schedule is None:
            return self.scene_index, False
        step = self.schedule.next(epoch)
        transition = self.schedule.is_transition(epoch)
        if transition:
            self.scene_index = step.scene_index
            self.env.set_scene(self.scenes[step.scene_index])
            logger.info(f"Curriculum: epoch {epoch} -> scene {step.scene_index} ('{self.scenes[step.scene_index].name}')")
        if step.lr_reset:
            for opt in self.optimizers().values():
                opt.reset_lr()
        return self.scene_index, step.lr_reset

    def _record_episodes(self, returns: Sequence[float]) -> int:
        if returns:
            self.episode_reward = float(np.mean(returns))
            self.episode_reward_std = float(np.std(returns))
        return len(returns)

    def save(self, name: str, epoch: int) -> Path:
        meta = {
            "algo": self.algo,
            "epoch": epoch,
            "steps": self.samples,
            "seed": self.settings.seed,
            "episode_reward": None if math.isnan(self.episode_reward) else self.episode_reward,
            "scene": self.scenes[self.scene_index].name,
        }
        return save_checkpoint(self.run_dir / "checkpoints" / name, self.agent.state_dict(), self.optimizer_state(), meta)

    def resume(self, checkpoint_dir: Path) -> Dict[str, Any]:
        """Load agent and optimizer state from a checkpoint directory."""
        agent_state, optimizer_state, meta = load_checkpoint(checkpoint_dir)
        self.agent.load_state_dict(agent_state)
        if optimizer_state is not None:
            self.load_optimizer_state(optimizer_state)
        return meta

    def train(self) -> TrainResult:
        """Run every epoch and return the metrics table."""
        self.run_dir.mkdir(parents=True, exist_ok=True)
        metrics_path = self.run_dir / "metrics.csv"
        timing_path = self.run_dir / "timing.csv"
        for path in (metrics_path, timing_path):
            if path.exists():
                path.unlink()
        dump_settings(self.settings, self.run_dir / "config.yaml")
        logger.info(
            f"Training {self.algo}: {self.epochs} epochs, {self.n_envs} envs, horizon {self.horizon}, "
            f"run directory {self.run_dir}"
        )

        self.env.reset()
        self._take_snapshot()
        started = time.perf_counter()
        last_path = self.run_dir / "checkpoints" / "last"
        for epoch in range(self.epochs):
            scene_index, lr_reset = self._curriculum_hook(epoch)
            self.env.timings.reset()
            epoch_start = time.perf_counter()
            aborted = 0
            try:
                stats = self.train_epoch(epoch)
            except NonFiniteLossError as exc:
                logger.warning(f"Epoch {epoch} aborted: {exc}; restoring last good state and halving actor lr")
                self._restore_snapshot()
                self.actor_opt.scale_lr(0.5)
                self.env.reset()
                stats = {}
                aborted = 1
            else:
                self._take_snapshot()

            row = {
                "epoch": epoch,
                "scene": scene_index,
                "lr_reset": int(lr_reset),
                "steps": self.samples,
                "episodes": stats.pop("episodes", 0),
                "episode_reward": self.episode_reward,
                "episode_reward_std": self.episode_reward_std,
                "step_reward": stats.pop("step_reward", float("nan")),
                "loss_actor": stats.pop("loss_actor", float("nan")),
                "loss_critic": stats.pop("loss_critic", float("nan")),
                "loss_cenet": stats.pop("loss_cenet", float("nan")),
                "cenet_mse": stats.pop("cenet_mse", float("nan")),
                "cenet_kl": stats.pop("cenet_kl", float("nan")),
                "grad_norm": stats.pop("grad_norm", float("nan")),
                "actor_lr": self.actor_opt.lr,
                "critic_lr": self.critic_opt.lr,
                "cenet_lr": self.context_opt.lr,
                "window_bytes": stats.pop("window_bytes", 0),
                "aborted": aborted,
            }
            row.update(stats)
            append_csv(metrics_path, row)

            timings = self.env.timings
            append_csv(timing_path, {
                "epoch": epoch,
                "steps": self.samples,
                "epoch_s": time.perf_counter() - epoch_start,
                "wallclock_s": time.perf_counter() - started,
                "dynamics_s": timings.dynamics,
                "rendering_s": timings.rendering,
                "collision_s": timings.collision,
            })

            if not aborted and np.isfinite(self.episode_reward) and self.episode_reward > self.best_reward:
                self.best_reward = self.episode_reward
                self.best_checkpoint = self.save("best", epoch)
            if (epoch + 1) % self.config.checkpoint_interval == 0 or epoch == self.epochs - 1:
                last_path = self.save("last", epoch)
            logger.info(
                f"[{self.algo}] epoch {epoch}: steps {self.samples}, episode reward {self.episode_reward:.2f}, "
                f"actor loss {row['loss_actor']:.4f}, lr {self.actor_opt.lr:g}"
            )

        return TrainResult(
            run_dir=self.run_dir,
            metrics=read_csv(metrics_path),
            best_reward=self.best_reward,
            best_checkpoint=self.best_checkpoint,
            last_checkpoint=last_path,
        )
