"""
Batched hybrid navigation environment.

Dynamics run on the tape, so observations, privileged observations and rewards
stay differentiable with respect to earlier actions. Rendering and collision
queries run on plain arrays at the new poses.
"""
import logging
from typing import List, Optional, Sequence

import numpy as np

from gradnav.diffcore import Tensor, ops
from gradnav.models.drone import STATE_DIM, ControlInput, DelayRegisters, DroneParams, DroneState
from gradnav.models.observation import (
    DEPTH_PRIOR_DIM,
    OBS_DIM,
    EnvObservation,
    StepResult,
)
from gradnav.models.scene import Camera, Scene
from gradnav.schemas.config import (
    CameraConfig,
    DynamicsConfig,
    EnvConfig,
    RandomizationRanges,
    RewardWeights,
)
from gradnav.services.dynamics import QuadrotorDynamics, quat_from_euler
from gradnav.services.renderer import GaussianRenderer
from gradnav.services.reward import RewardService
from gradnav.services.timing import StepTimings
from gradnav.utils.io import to_uint8

logger = logging.getLogger(__name__)

ACTION_DIM = 4
PRIOR_ROWS = 4
PRIOR_COLS = 6


def depth_prior(depth: np.ndarray) -> np.ndarray:
    """
    Average-pool depth images onto a 4 x 6 grid, flattened row-major.

    Images whose size does not divide evenly are padded by replicating the last
    row/column first.

    Args:
        depth: (H, W) or (n, H, W)

    Returns:
        (24,) or (n, 24)
    """
    images = np.asarray(depth, dtype=np.float64)
    single = images.ndim == 2
    if single:
        images = images[None]
    n, height, width = images.shape
    pad_h = (-height) % PRIOR_ROWS
    pad_w = (-width) % PRIOR_COLS
    if pad_h or pad_w:
        images = np.pad(images, ((0, 0), (0, pad_h), (0, pad_w)), mode="edge")
    cell_h = images.shape[1] // PRIOR_ROWS
    cell_w = images.shape[2] // PRIOR_COLS
    pooled = images.reshape(n, PRIOR_ROWS, cell_h, PRIOR_COLS, cell_w).mean(axis=(2, 4))
    flat = pooled.reshape(n, DEPTH_PRIOR_DIM)
    return flat[0] if single else flat


def decode_actions(actions: Tensor, rate_max: float, hover_thrust: float) -> ControlInput:
    """Map normalized actions to commands: zero is hover, rates squashed to +-rate_max, thrust to (0, 1)."""
    offset = float(np.log(hover_thrust / (1.0 - hover_thrust)))
    w_d = rate_max * ops.tanh(actions[:, :3])
    c = ops.sigmoid(actions[:, 3] + offset)
    return ControlInput(w_d=w_d, c=c)


class NavigationEnv:
    """
    n drones flying in one scene.

    Done environments reset automatically at the start of the next ``step`` (or
    on ``reset_done``); the others continue across calls, keeping their graph
    until ``detach_state`` cuts it.
    """

    def __init__(
        self,
        scene: Scene,
        n_envs: int,
        config: Optional[EnvConfig] = None,
        camera: Optional[CameraConfig] = None,
        randomization: Optional[RandomizationRanges] = None,
        dynamics_config: Optional[DynamicsConfig] = None,
        reward_weights: Optional[RewardWeights] = None,
        seed: int = 0,
    ):
        if n_envs < 1:
            raise ValueError(f"n_envs must be at least 1, got {n_envs}")
        self.scene = scene
        self.n_envs = n_envs
        self.config = config or EnvConfig()
        self.camera_config = camera or CameraConfig()
        self.camera = Camera.from_config(self.camera_config)
        self.randomization = randomization or RandomizationRanges()
        self.dynamics = QuadrotorDynamics(dynamics_config or DynamicsConfig())
        self.reward = RewardService(reward_weights or RewardWeights())
        self.renderer = GaussianRenderer(self.camera)
        self.rng = np.random.default_rng(seed)
        self.timings = StepTimings()
        self.hover_thrust = self._hover_thrust()

        n = n_envs
        self.state: Optional[DroneState] = None
        self.registers: Optional[DelayRegisters] = None
        self.params: Optional[DroneParams] = None
        self.q0 = np.tile([1.0, 0.0, 0.0, 0.0], (n, 1))
        self.prev_action = Tensor(np.zeros((n, ACTION_DIM)))
        self.prev2_action = Tensor(np.zeros((n, ACTION_DIM)))
        self.progress = np.zeros(n, dtype=np.int64)
        self.pending_reset = np.zeros(n, dtype=bool)
        self.history = np.zeros((n, self.config.history_length, OBS_DIM))
        self.images = np.zeros((n, self.camera.height, self.camera.width, 3), dtype=np.uint8)
        self.depth = np.full((n, self.camera.height, self.camera.width), self.camera.far)
        self.episode_return = np.zeros(n)
        self.episode_length = np.zeros(n, dtype=np.int64)
        self.completed_returns: List[float] = []
        self.completed_lengths: List[int] = []
        self.total_steps = 0

    @classmethod
    def from_settings(cls, settings, scene: Scene, n_envs: Optional[int] = None, seed: Optional[int] = None) -> "NavigationEnv":
        return cls(
            scene=scene,
            n_envs=n_envs or settings.n_envs,
            config=settings.env,
            camera=settings.camera,
            randomization=settings.randomization,
            dynamics_config=settings.dynamics,
            reward_weights=settings.reward,
            seed=settings.seed if seed is None else seed,
        )

    def _hover_thrust(self) -> float:
        if self.config.hover_thrust is not None:
            return self.config.hover_thrust
        mass = 0.5 * sum(self.randomization.mass)
        thrust = 0.5 * sum(self.randomization.max_thrust)
        hover = mass * abs(self.dynamics.config.gravity[2]) / thrust
        if not 0.0 < hover < 1.0:
            raise ValueError(f"mid-range drone cannot hover: thrust fraction {hover:.3f}")
        return hover

    # --------------------------------------------------------------- resets
    def reset(self, indices: Optional[Sequence[int]] = None) -> EnvObservation:
        """
        Reset the given environments (all by default) and return the observation of every row.

        Positions are uniform in the init cube, roll/pitch/yaw uniform in
        +-init_attitude_range, velocities and rates zero, physical parameters
        freshly randomized, and the history filled with the first observation.
        """
        n = self.n_envs
        rows = np.arange(n) if indices is None or self.state is None else np.unique(np.asarray(indices, dtype=np.int64))
        if rows.size and (rows.min() < 0 or rows.max() >= n):
            raise ValueError(f"reset indices must lie in [0, {n}), got {rows.tolist()}")
        if rows.size == 0:
            return self.observe()
        mask = np.zeros(n, dtype=bool)
        mask[rows] = True
        k = rows.size

        cfg = self.config
        half = 0.5 * cfg.init_box_side
        positions = np.asarray(cfg.init_center, dtype=np.float64) + self.rng.uniform(-half, half, size=(k, 3))
        span = cfg.init_attitude_range
        euler = self.rng.uniform(-span, span, size=(k, 3))
        quats = quat_from_euler(euler[:, 0], euler[:, 1], euler[:, 2])
        fresh_params = self.dynamics.sample_params(self.randomization, self.rng, k)

        values = np.zeros((n, STATE_DIM)) if self.state is None else self.state.numpy()
        values[rows] = 0.0
        values[rows, 0:3] = positions
        values[rows, 3:7] = quats
        fresh = DroneState.from_array(values)

        if self.state is None:
            self.params = fresh_params
            self.state = fresh
            self.registers = self._initial_registers()
        else:
            self.params = self.params.scatter(rows, fresh_params)
            self.state = self.state.select(mask, fresh)
            self.registers = self.registers.select(mask, self._initial_registers())

        zeros = np.zeros((n, ACTION_DIM))
        self.prev_action = ops.where(mask[:, None], zeros, self.prev_action)
        self.prev2_action = ops.where(mask[:, None], zeros, self.prev2_action)
        self.q0[rows] = quats
        self.progress[rows] = 0
        self.episode_return[rows] = 0.0
        self.episode_length[rows] = 0
        self.pending_reset[rows] = False

        rgb, depth = self.renderer.render_batch(self.scene, positions, quats)
        self.images[rows] = to_uint8(rgb)
        self.depth[rows] = depth

        obs = self._observation()
        self.history[rows] = np.repeat(obs.data[rows][:, None, :], cfg.history_length, axis=1)
        logger.debug(f"Reset {k} of {n} environments")
        return self._env_observation(obs)

    def reset_done(self) -> EnvObservation:
        """Reset every environment that finished on the last step, then observe."""
        if self.state is None:
            return self.reset()
        if self.pending_reset.any():
            return self.reset(np.flatnonzero(self.pending_reset))
        return self.observe()

    def observe(self) -> EnvObservation:
        if self.state is None:
            raise RuntimeError("environment has not been reset")
        return self._env_observation(self._observation())

    def _initial_registers(self) -> DelayRegisters:
        n = self.n_envs
        return DelayRegisters(
            w_tilde=Tensor(np.zeros((n, 3))),
            c_tilde=Tensor(self.params.hover_thrust.copy()),
            w_dot_prev=Tensor(np.zeros((n, 3))),
        )

    # ---------------------------------------------------------- observations
    def _observation(self) -> Tensor:
        """o = [h, q, v, a_t, a_{t-1}] on the tape."""
        s = self.state
        return ops.concat([s.p[:, 2:3], s.q, s.v, self.prev_action, self.prev2_action], axis=1)

    def _privileged(self, obs: Tensor) -> Tensor:
        return ops.concat([obs, self.state.p, Tensor(depth_prior(self.depth))], axis=1)

    def _env_observation(self, obs: Tensor) -> EnvObservation:
        return EnvObservation(
            obs=obs,
            priv=self._privileged(obs),
            images=self.images.copy(),
            depth=self.depth.copy(),
            history=self.flat_history(),
        )

    def flat_history(self) -> np.ndarray:
        """(n, history_length * 16), oldest observation first."""
        return self.history.reshape(self.n_envs, -1).copy()

    # ------------------------------------------------------------------ step
    def step(self, actions: Tensor) -> StepResult:
        """
        Advance every environment by one control period.

        Args:
            actions: (n, 4) normalized actions; non-finite rows are replaced by
                the hover action and the environment terminates with a fault

        Returns:
            StepResult describing the states just reached (terminal states for
            rows that are done)
        """
        if self.state is None:
            raise RuntimeError("environment has not been reset")
        if self.pending_reset.any():
            self.reset(np.flatnonzero(self.pending_reset))
        actions = actions if isinstance(actions, Tensor) else Tensor(np.asarray(actions, dtype=np.float64))
        if actions.shape != (self.n_envs, ACTION_DIM):
            raise ValueError(f"actions must have shape ({self.n_envs}, {ACTION_DIM}), got {actions.shape}")

        fault = ~np.all(np.isfinite(actions.data), axis=1)
        if fault.any():
            logger.warning(f"Non-finite actions in environments {np.flatnonzero(fault).tolist()}; terminating them")
            actions = ops.where(fault[:, None], 0.0, actions)

        u = decode_actions(actions, self.config.rate_max, self.hover_thrust)
        with self.timings.measure("dynamics"):
            state, registers = self.dynamics.step(self.state, u, self.params, self.registers, self.config.dt)

        positions, quats = state.p.data, state.q.data
        with self.timings.measure("rendering"):
            rgb, depth = self.renderer.render_batch(self.scene, positions, quats)
        with self.timings.measure("collision"):
            obstacle = self.renderer.nearest_visible_obstacle(self.scene, positions, quats)
        self.timings.steps += 1

        flags = self.reward.check_termination(state, self.scene, fault)
        reward = self.reward.compute_reward(
            state, actions, self.prev_action, self.prev2_action, self.q0, self.scene, self.camera, flags, obstacle
        )

        self.state, self.registers = state, registers
        self.prev2_action, self.prev_action = self.prev_action, actions
        self.images = to_uint8(rgb)
        self.depth = depth
        self.progress += 1
        self.total_steps += self.n_envs

        terminated = flags.any
        truncated = (self.progress >= self.config.episode_length) & ~terminated
        done = terminated | truncated

        obs = self._observation()
        self.history = np.concatenate([self.history[:, 1:], obs.data[:, None, :]], axis=1)

        self.episode_return += reward.total.data
        self.episode_length += 1
        for i in np.flatnonzero(done):
            self.completed_returns.append(float(self.episode_return[i]))
            self.completed_lengths.append(int(self.episode_length[i]))
        if terminated.any():
            reasons = {k: int(v.sum()) for k, v in flags.to_dict().items() if v.any()}
            logger.debug(f"Early termination in {int(terminated.sum())} environments: {reasons}")
        self.pending_reset = done.copy()

        return StepResult(
            obs=obs,
            priv=self._privileged(obs),
            images=self.images.copy(),
            depth=self.depth.copy(),
            history=self.flat_history(),
            reward=reward,
            done=done,
            terminated=terminated,
            truncated=truncated,
            flags=flags,
            obstacle_distance=obstacle[0],
        )

    # ------------------------------------------------------------ lifecycle
    def detach_state(self) -> None:
        """Cut the graph so the next window starts from constant states."""
        if self.state is None:
            return
        self.state = self.state.detach()
        self.registers = self.registers.detach()
        self.prev_action = self.prev_action.detach()
        self.prev2_action = self.prev2_action.detach()

    def set_scene(self, scene: Scene) -> EnvObservation:
        """Switch every environment to a new scene and start fresh episodes."""
        logger.info(f"Switching {self.n_envs} environments to scene '{scene.name}'")
        self.scene = scene
        self.completed_returns.clear()
        self.completed_lengths.clear()
        return self.reset()

    def pop_completed(self) -> List[float]:
        """Returns of episodes finished since the last call."""
        returns = list(self.completed_returns)
        self.completed_returns.clear()
        self.completed_lengths.clear()
        return returns
