"""
Evaluation protocol, controllers and rollout traces.

A rollout succeeds when the drone (i) never terminates early, (ii) passes every
waypoint in order within ``waypoint_radius`` and (iii) keeps at least
``safe_distance`` from every obstacle point throughout.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Protocol, Sequence, Union

import numpy as np
import pandas as pd
import yaml

from gradnav.core.config import Settings
from gradnav.diffcore import Tensor, no_grad
from gradnav.models.observation import REWARD_TERMS, EnvObservation
from gradnav.models.scene import Scene
from gradnav.schemas.config import EvalConfig
from gradnav.services.checkpoint import CheckpointFormatError, load_checkpoint
from gradnav.services.dynamics import rotation_matrix
from gradnav.services.environment import NavigationEnv
from gradnav.services.networks import NavigationAgent
from gradnav.services.trainers.base import spawn_seeds

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
STAGE_MARGIN = 0.5


class Controller(Protocol):
    def act(self, observation: EnvObservation, env: NavigationEnv) -> np.ndarray:
        ...


@dataclass
class TrajectoryScore:
    success: bool
    waypoints_reached: int
    waypoints_total: int
    min_clearance: float
    terminated: bool

    def to_dict(self) -> Dict[str, object]:
        return {
            "success": self.success,
            "waypoints_reached": self.waypoints_reached,
            "waypoints_total": self.waypoints_total,
            "min_clearance": float(self.min_clearance),
            "terminated": self.terminated,
        }


@dataclass
class EvaluationResult:
    n: int
    successes: int
    reward_mean: float
    reward_std: float
    returns: List[float] = field(default_factory=list)
    scores: List[TrajectoryScore] = field(default_factory=list)
    traces: List[Path] = field(default_factory=list)

    @property
    def success_line(self) -> str:
        return f"{self.successes}/{self.n}"


def obstacle_clearance(points: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Distance from each position to the closest obstacle point (inf when there are none)."""
    positions = np.atleast_2d(positions)
    if points.shape[0] == 0:
        return np.full(positions.shape[0], np.inf)
    return np.linalg.norm(positions[:, None, :] - points[None, :, :], axis=-1).min(axis=1)


def score_trajectory(
    positions: np.ndarray,
    clearances: np.ndarray,
    terminated: bool,
    waypoints: np.ndarray,
    radius: float = 0.3,
    safe_distance: float = 0.2,
) -> TrajectoryScore:
    """
    Apply the success criteria to one trajectory.

    Args:
        positions: (T, 3) visited positions
        clearances: (T,) obstacle clearance at each position
        terminated: whether the episode ended early
        waypoints: (k, 3) in visiting order
        radius: approach radius, m
        safe_distance: minimum clearance, m
    """
    reached = 0
    for p in np.asarray(positions, dtype=np.float64):
        if reached < len(waypoints) and np.linalg.norm(p - waypoints[reached]) <= radius:
            reached += 1
    min_clearance = float(np.min(clearances)) if len(clearances) else float("inf")
    success = (not terminated) and reached == len(waypoints) and min_clearance >= safe_distance
    return TrajectoryScore(success, reached, len(waypoints), min_clearance, bool(terminated))


def stage_labels(x: np.ndarray, gate_x: Optional[float], margin: float = STAGE_MARGIN) -> np.ndarray:
    """'approaching' / 'passing' / 'after' by x relative to the gate plane."""
    x = np.asarray(x, dtype=np.float64)
    if gate_x is None:
        return np.full(x.shape, "none", dtype=object)
    return np.where(x < gate_x - margin, "approaching", np.where(x <= gate_x + margin, "passing", "after")).astype(object)


# ------------------------------------------------------------------ controllers
class AgentController:
    """Deterministic policy: mean action with the context posterior mean."""

    def __init__(self, agent: NavigationAgent):
        self.agent = agent
        self.last_latent: Optional[np.ndarray] = None

    def act(self, observation: EnvObservation, env: NavigationEnv) -> np.ndarray:
        agent = self.agent
        with no_grad():
            e = agent.embed(agent.encoder_images(observation.images, observation.depth))
            z = agent.latent(observation.history, e)
            mean, _ = agent.act(observation.obs, z, Tensor(e))
        self.last_latent = z
        return mean.data.copy()


class ReferenceTrackingController:
    """
    Scripted geometric tracker of the scene's reference polyline.

    Chases a carrot ``lookahead`` metres ahead of the closest polyline point at
    ``speed``, converts the desired acceleration into a thrust vector using the
    true drone parameters, steers the body z axis onto it with body rates, holds
    zero yaw, and inverts the environment's action squashing.
    """

    def __init__(
        self,
        scene: Scene,
        speed: float = 1.0,
        lookahead: float = 0.5,
        k_velocity: float = 1.5,
        k_attitude: float = 3.0,
        k_yaw: float = 1.0,
    ):
        self.scene = scene
        self.speed = speed
        self.lookahead = lookahead
        self.k_velocity = k_velocity
        self.k_attitude = k_attitude
        self.k_yaw = k_yaw
        points = scene.trajectory_array
        self.points = points
        seg = np.diff(points, axis=0)
        self.seg_len = np.linalg.norm(seg, axis=1)
        self.cum_len = np.concatenate([[0.0], np.cumsum(self.seg_len)])
        self.last_latent = None

    def _arclength(self, p: np.ndarray) -> np.ndarray:
        starts, seg = self.points[:-1], np.diff(self.points, axis=0)
        length_sq = np.maximum(self.seg_len ** 2, 1e-12)
        t = np.clip(np.einsum("nsk,sk->ns", p[:, None, :] - starts[None], seg) / length_sq, 0.0, 1.0)
        closest = starts[None] + t[..., None] * seg[None]
        best = np.argmin(np.linalg.norm(p[:, None, :] - closest, axis=2), axis=1)
        return self.cum_len[best] + t[np.arange(len(p)), best] * self.seg_len[best]

    def _point_at(self, s: np.ndarray) -> np.ndarray:
        return np.stack([np.interp(s, self.cum_len, self.points[:, k]) for k in range(3)], axis=1)

    def desired_velocity(self, p: np.ndarray) -> np.ndarray:
        """
        Velocity toward the carrot: full ``speed`` while the carrot is at least
        ``lookahead`` away, tapering linearly to zero at the end of the polyline.
        """
        p = np.atleast_2d(p)
        s = np.minimum(self._arclength(p) + self.lookahead, self.cum_len[-1])
        offset = self._point_at(s) - p
        distance = np.linalg.norm(offset, axis=1, keepdims=True)
        magnitude = self.speed * np.minimum(distance / self.lookahead, 1.0)
        return offset / np.maximum(distance, 1e-9) * magnitude

    def act(self, observation: EnvObservation, env: NavigationEnv) -> np.ndarray:
        state, params = env.state, env.params
        p, v, q = state.p.data, state.v.data, state.q.data

        a_des = self.k_velocity * (self.desired_velocity(p) - v)

        gravity = params.gravity
        force = params.mass[:, None] * (a_des - gravity) + params.k_drag[:, None] * v
        z_des = force / np.maximum(np.linalg.norm(force, axis=1, keepdims=True), 1e-9)

        R = rotation_matrix(Tensor(q)).data
        z_body, x_body = R[:, :, 2], R[:, :, 0]
        thrust = np.einsum("nk,nk->n", force, z_body) / params.max_thrust
        omega_world = self.k_attitude * np.cross(z_body, z_des)
        omega_body = np.einsum("nkj,nk->nj", R, omega_world)
        yaw = np.arctan2(x_body[:, 1], x_body[:, 0])
        omega_body[:, 2] += -self.k_yaw * yaw

        rate_max = env.config.rate_max
        rates = np.arctanh(np.clip(omega_body / rate_max, -0.995, 0.995))
        c = np.clip(thrust, 0.01, 0.99)
        h = env.hover_thrust
        thrust_action = np.log(c / (1.0 - c)) - np.log(h / (1.0 - h))
        return np.concatenate([rates, thrust_action[:, None]], axis=1)


# ------------------------------------------------------------------ protocol
def load_agent(checkpoint_dir: PathLike, settings: Settings) -> NavigationAgent:
    """
    Build an agent from ``settings.net`` / ``settings.camera`` and load checkpoint weights.

    Raises:
        FileNotFoundError: if the checkpoint does not exist
        CheckpointFormatError: if the stored parameters do not fit the configured networks
    """
    agent_state, _, meta = load_checkpoint(checkpoint_dir)
    agent = NavigationAgent(settings.net, settings.camera, seed=0)
    try:
        agent.load_state_dict(agent_state)
    except ValueError as exc:
        raise CheckpointFormatError(f"{checkpoint_dir}: checkpoint does not match the configured networks: {exc}") from None
    logger.info(f"Loaded {meta.get('algo', '?')} checkpoint from epoch {meta.get('epoch', '?')} at {checkpoint_dir}")
    return agent


def _write_trace(path: Path, frame: pd.DataFrame, meta: Dict[str, object]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    with open(path.with_suffix(".meta.yaml"), "w", encoding="utf-8") as handle:
        yaml.safe_dump(meta, handle, sort_keys=False)
    return path


def evaluate(
    controller: Controller,
    scene: Scene,
    settings: Settings,
    n: Optional[int] = None,
    seed: Optional[int] = None,
    trace_dir: Optional[PathLike] = None,
    eval_config: Optional[EvalConfig] = None,
) -> EvaluationResult:
    """
    Run ``n`` randomized episodes in parallel and score them.

    Each environment runs until its first episode ends (or ``max_steps``).

    Args:
        controller: maps observations to actions
        scene: evaluation scene
        settings: environment, camera, randomization and reward settings
        n: number of rollouts (default ``eval.n``)
        seed: evaluation seed (default ``settings.seed``)
        trace_dir: where to write one trace CSV + meta YAML per rollout

    Returns:
        EvaluationResult with the success count and return statistics
    """
    cfg = eval_config or settings.eval
    n = n or cfg.n
    seed = settings.seed if seed is None else seed
    env_seed = spawn_seeds(seed, 1)[0]
    env = NavigationEnv.from_settings(settings, scene, n_envs=n, seed=env_seed)
    max_steps = cfg.max_steps or env.config.episode_length

    observation = env.reset()
    active = np.ones(n, dtype=bool)
    records: List[List[dict]] = [[] for _ in range(n)]
    returns = np.zeros(n)
    terminated = np.zeros(n, dtype=bool)
    positions: List[List[np.ndarray]] = [[] for _ in range(n)]
    clearances: List[List[float]] = [[] for _ in range(n)]
    points = scene.obstacle_array
    gate_x = scene.gate_center[0] if scene.gate_center is not None else None

    with no_grad():
        for step in range(max_steps):
            actions = np.asarray(controller.act(observation, env), dtype=np.float64)
            latent = getattr(controller, "last_latent", None)
            step_result = env.step(Tensor(actions))
            state = env.state
            p, q, v = state.p.data, state.q.data, state.v.data
            clearance = obstacle_clearance(points, p)
            stages = stage_labels(p[:, 0], gate_x)
            components = step_result.reward.components()
            for i in np.flatnonzero(active):
                row = {"step": step}
                row.update({f"p{k}": p[i, j] for j, k in enumerate("xyz")})
                row.update({f"q{k}": q[i, j] for j, k in enumerate("wxyz")})
                row.update({f"v{k}": v[i, j] for j, k in enumerate("xyz")})
                row.update({f"a{j}": actions[i, j] for j in range(actions.shape[1])})
                row["reward"] = step_result.reward.total.data[i]
                row.update({f"reward_{name}": components[name][i] for name in REWARD_TERMS})
                row.update({
                    "done": bool(step_result.done[i]),
                    "terminated": bool(step_result.terminated[i]),
                    "truncated": bool(step_result.truncated[i]),
                    "ceiling_exceeded": bool(step_result.flags.ceiling_exceeded[i]),
                    "speed_exceeded": bool(step_result.flags.speed_exceeded[i]),
                    "out_of_bounds": bool(step_result.flags.out_of_bounds[i]),
                    "fault": bool(step_result.flags.fault[i]),
                    "clearance": clearance[i],
                    "fov_obstacle_distance": step_result.obstacle_distance[i],
                    "stage": stages[i],
                })
                if latent is not None:
                    row.update({f"z{j}": latent[i, j] for j in range(latent.shape[1])})
                records[i].append(row)
                positions[i].append(p[i].copy())
                clearances[i].append(clearance[i])
                returns[i] += step_result.reward.total.data[i]
            terminated |= active & step_result.terminated
            active &= ~step_result.done
            if not active.any():
                break
            observation = env.observe()

    scores, traces = [], []
    for i in range(n):
        score = score_trajectory(
            np.array(positions[i]), np.array(clearances[i]), bool(terminated[i]),
            scene.waypoint_array, cfg.waypoint_radius, cfg.safe_distance,
        )
        scores.append(score)
        if trace_dir is not None:
            meta = {"scene": scene.name, "seed": seed, "rollout": i, "steps": len(records[i]),
                    "return": float(returns[i])}
            meta.update(score.to_dict())
            traces.append(_write_trace(Path(trace_dir) / f"trace_{i:03d}.csv", pd.DataFrame(records[i]), meta))

    successes = sum(s.success for s in scores)
    result = EvaluationResult(
        n=n,
        successes=successes,
        reward_mean=float(np.mean(returns)),
        reward_std=float(np.std(returns)),
        returns=returns.tolist(),
        scores=scores,
        traces=traces,
    )
    logger.info(
        f"Evaluation on '{scene.name}': {result.success_line} successes, "
        f"reward {result.reward_mean:.2f} +- {result.reward_std:.2f}"
    )
    return result
