"""
Configuration schemas for simulation, rewards, networks and training.

Each section is a pydantic model so a run configuration can be validated field
by field and written back verbatim into the run directory.
"""
from typing import Literal, Optional, Tuple

from pydantic import Field, field_validator, model_validator

from gradnav.schemas.base import BaseSchema

Interval = Tuple[float, float]
Algorithm = Literal["gradnav", "bptt", "ppo"]
Ablation = Literal["none", "no_visual", "depth_only", "no_velocity", "no_cenet"]

GRAVITY = 9.81


class DynamicsConfig(BaseSchema):
    """Fixed (non-randomized) parameters of the attitude loop and world."""

    kp: Tuple[float, float, float] = Field((1.0, 1.0, 2.0), description="Diagonal P gain of the body-rate loop")
    kd: Tuple[float, float, float] = Field((0.01, 0.01, 0.02), description="Diagonal D gain on the previous angular acceleration")
    gravity: Tuple[float, float, float] = Field((0.0, 0.0, -GRAVITY), description="World gravity vector, m/s^2")


class RandomizationRanges(BaseSchema):
    """Per-episode uniform ranges of the physical drone parameters."""

    mass: Interval = Field((1.0, 1.5), description="kg")
    max_thrust: Interval = Field((22.0, 30.0), description="N")
    inertia_xy: Interval = Field((0.075, 0.125), description="Ix, Iy in kg*m^2")
    inertia_z: Interval = Field((0.15, 0.25), description="Iz in kg*m^2")
    motor_delay: Interval = Field((0.5, 0.8), description="Thrust low-pass factor in (0, 1]")
    rate_delay: Interval = Field((0.5, 0.8), description="Body-rate low-pass factor in (0, 1]")
    drag: Interval = Field((0.4, 0.6), description="Linear drag force coefficient")

    @model_validator(mode="after")
    def check_intervals(self) -> "RandomizationRanges":
        for name in ("mass", "max_thrust", "inertia_xy", "inertia_z", "motor_delay", "rate_delay", "drag"):
            low, high = getattr(self, name)
            if low > high:
                raise ValueError(f"{name}: low {low} exceeds high {high}")
        for name in ("mass", "max_thrust", "inertia_xy", "inertia_z"):
            if getattr(self, name)[0] <= 0:
                raise ValueError(f"{name}: values must be positive")
        for name in ("motor_delay", "rate_delay"):
            low, high = getattr(self, name)
            if low <= 0 or high > 1:
                raise ValueError(f"{name}: delay factors must lie in (0, 1]")
        if self.drag[0] < 0:
            raise ValueError("drag: coefficient must be non-negative")
        return self


class CameraConfig(BaseSchema):
    """Pinhole camera rigidly mounted on the drone body."""

    width: int = Field(64, ge=1)
    height: int = Field(64, ge=1)
    fx: float = Field(32.0, gt=0)
    fy: float = Field(32.0, gt=0)
    cx: Optional[float] = Field(None, description="Principal point x in px; defaults to width / 2")
    cy: Optional[float] = Field(None, description="Principal point y in px; defaults to height / 2")
    near: float = Field(0.05, gt=0)
    far: float = Field(10.0, gt=0, description="Depth reported where nothing is hit")
    fov_half_angle: float = Field(0.785398, gt=0, lt=3.141593, description="rad, used for obstacle visibility")
    mount_translation: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    mount_pitch: float = Field(0.0, description="Downward tilt of the optical axis, rad")


class EnvConfig(BaseSchema):
    """Batched environment layout and reset protocol."""

    n_envs: Optional[int] = Field(None, ge=1, description="None selects the algorithm default")
    dt: float = Field(0.05, gt=0)
    episode_length: int = Field(600, ge=1)
    init_center: Tuple[float, float, float] = (0.0, 0.0, 1.3)
    init_box_side: float = Field(1.0, ge=0)
    init_attitude_range: float = Field(0.25, ge=0, description="Half-range of roll/pitch/yaw, rad")
    rate_max: float = Field(3.0, gt=0, description="Body-rate command bound, rad/s")
    hover_thrust: Optional[float] = Field(
        None, gt=0, lt=1, description="Normalized thrust decoded from a zero action; None uses the mid-range mass and thrust"
    )
    history_length: int = Field(5, ge=1)


class RewardWeights(BaseSchema):
    """Weights of the stepwise reward terms and termination thresholds."""

    survival: float = 8.0
    linear_velocity: float = -0.5
    pose: float = -0.5
    height: float = -2.0
    action: float = -1.0
    action_rate: float = -1.0
    smoothness: float = -1.0
    yaw_alignment: float = 0.25
    waypoint: float = 2.0
    obstacle: float = 1.0
    out_of_map: float = -2.0
    ref_tracking: float = -2.0
    d_threshold: float = Field(0.5, gt=0, description="Obstacle proximity threshold, m")
    h_target: float = Field(1.3, description="Target (and initial hover) height, m")
    ceiling: float = Field(3.0, description="m")
    v_limit: float = Field(20.0, gt=0, description="m/s")
    oob_limit: float = Field(3.0, gt=0, description="Allowed overshoot beyond the map bounds, m")


class NetConfig(BaseSchema):
    """Network widths and latent sizes."""

    hidden_sizes: Tuple[int, ...] = (512, 256, 128)
    latent_dim: int = Field(16, ge=1)
    visual_dim: int = Field(24, ge=1)
    encoder_channels: Tuple[int, ...] = (8, 16, 32, 64)
    encoder_hidden: int = Field(512, ge=1)
    log_std_init: float = -1.0
    beta: float = Field(0.1, ge=0, description="KL weight of the context estimator")
    ablation: Ablation = "none"

    @field_validator("hidden_sizes", "encoder_channels")
    @classmethod
    def check_widths(cls, v):
        if not v or any(w < 1 for w in v):
            raise ValueError("layer widths must be positive and non-empty")
        return v


class TrainConfig(BaseSchema):
    """Optimization hyperparameters shared by the three trainers."""

    algo: Algorithm = "gradnav"
    epochs: int = Field(600, ge=1)
    horizon: Optional[int] = Field(None, ge=1, description="None selects 32 (gradnav/ppo) or the episode length (bptt)")
    gamma: float = Field(0.99, gt=0, le=1)
    lam: float = Field(0.95, ge=0, le=1, description="TD-lambda / GAE lambda")
    actor_lr: float = Field(1e-4, gt=0)
    critic_lr: float = Field(1e-4, gt=0)
    cenet_lr: float = Field(5e-4, gt=0)
    adam_betas: Tuple[float, float] = (0.9, 0.999)
    adam_eps: float = Field(1e-8, gt=0)
    grad_norm: float = Field(1.0, gt=0)
    critic_iterations: int = Field(16, ge=1)
    critic_minibatches: int = Field(4, ge=1)
    target_critic_alpha: float = Field(0.2, ge=0, le=1)
    cenet_batch_size: int = Field(1024, ge=1)
    encoder_chunk: int = Field(256, ge=1, description="Images per re-run when pushing embedding gradients")
    ppo_clip: float = Field(0.1, gt=0)
    ppo_entropy: float = Field(1e-3, ge=0)
    ppo_epochs: int = Field(5, ge=1)
    ppo_minibatches: int = Field(4, ge=1)
    ppo_normalize_advantages: bool = True
    checkpoint_interval: int = Field(50, ge=1)

    def resolve_horizon(self, episode_length: int) -> int:
        if self.algo == "bptt":
            if self.horizon is not None and self.horizon != episode_length:
                raise ValueError(
                    f"bptt samples whole episodes: horizon {self.horizon} must equal "
                    f"episode_length {episode_length}"
                )
            return episode_length
        horizon = self.horizon if self.horizon is not None else 32
        if horizon > episode_length:
            raise ValueError(f"horizon {horizon} exceeds episode_length {episode_length}")
        return horizon

    def resolve_n_envs(self, configured: Optional[int]) -> int:
        if configured is not None:
            return configured
        return 32 if self.algo == "bptt" else 128


class CurriculumConfig(BaseSchema):
    """Rolling schedule across scenes."""

    enabled: bool = False
    passes: int = Field(5, ge=1)
    epochs_per_pass: int = Field(100, ge=1)
    lr_reset: bool = True


class EvalConfig(BaseSchema):
    """Success criteria of the evaluation protocol."""

    n: int = Field(10, ge=1)
    waypoint_radius: float = Field(0.3, gt=0)
    safe_distance: float = Field(0.2, ge=0)
    max_steps: Optional[int] = Field(None, ge=1, description="None runs a full episode")
