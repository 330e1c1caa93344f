from gradnav.schemas.base import BaseSchema
from gradnav.schemas.checkpoint import CheckpointMeta
from gradnav.schemas.config import (
    CameraConfig,
    CurriculumConfig,
    DynamicsConfig,
    EnvConfig,
    EvalConfig,
    NetConfig,
    RandomizationRanges,
    RewardWeights,
    TrainConfig,
)
from gradnav.schemas.scene import BoundsSchema, GaussianSchema, SceneSchema

__all__ = [
    "BaseSchema",
    "CheckpointMeta",
    "CameraConfig",
    "CurriculumConfig",
    "DynamicsConfig",
    "EnvConfig",
    "EvalConfig",
    "NetConfig",
    "RandomizationRanges",
    "RewardWeights",
    "TrainConfig",
    "BoundsSchema",
    "GaussianSchema",
    "SceneSchema",
]
