from typing import Optional

from pydantic import Field

from gradnav.schemas.base import BaseSchema


class CheckpointMeta(BaseSchema):
    """Contents of a checkpoint's ``meta.yaml``."""

    algo: str = Field(..., description="Algorithm that produced the weights")
    epoch: int = Field(..., ge=0)
    steps: int = Field(0, ge=0, description="Environment steps collected so far")
    seed: int = 0
    episode_reward: Optional[float] = Field(None, description="Running mean episode return, if any episode finished")
    scene: Optional[str] = Field(None, description="Scene active when the checkpoint was written")
