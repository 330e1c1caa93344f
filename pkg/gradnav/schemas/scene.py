"""
Scene file schema.

A scene file is one YAML document::

    background: [r, g, b]
    bounds: {min: [x, y, z], max: [x, y, z]}
    waypoints: [[x, y, z], ...]
    reference_trajectory: [[x, y, z], ...]
    gaussians:
      - {mu: [..3], scale: [..3], rot: [w, x, y, z], color: [..3], alpha: a, obstacle: bool}
"""
from typing import List, Optional, Tuple

from pydantic import Field, field_validator, model_validator

from gradnav.schemas.base import BaseSchema

Vec3 = Tuple[float, float, float]


class GaussianSchema(BaseSchema):
    mu: Vec3 = Field(..., description="World mean, m")
    scale: Vec3 = Field(..., description="Per-axis standard deviation, m")
    rot: Tuple[float, float, float, float] = Field(..., description="Unit quaternion, scalar first")
    color: Vec3 = Field(..., description="RGB in [0, 1]")
    alpha: float = Field(..., ge=0.0, le=1.0, description="Opacity")
    obstacle: bool = False

    @field_validator("scale")
    @classmethod
    def positive_scale(cls, v):
        if min(v) <= 0:
            raise ValueError("all scales must be positive")
        return v

    @field_validator("color")
    @classmethod
    def unit_color(cls, v):
        if min(v) < 0 or max(v) > 1:
            raise ValueError("color channels must lie in [0, 1]")
        return v

    @field_validator("rot")
    @classmethod
    def nonzero_rot(cls, v):
        if sum(c * c for c in v) == 0:
            raise ValueError("rotation quaternion must be non-zero")
        return v


class BoundsSchema(BaseSchema):
    min: Vec3
    max: Vec3

    @model_validator(mode="after")
    def ordered(self) -> "BoundsSchema":
        if any(lo >= hi for lo, hi in zip(self.min, self.max)):
            raise ValueError("bounds.min must be below bounds.max on every axis")
        return self


class SceneSchema(BaseSchema):
    name: str = "scene"
    background: Vec3 = (0.0, 0.0, 0.0)
    bounds: BoundsSchema
    waypoints: List[Vec3] = Field(default_factory=list)
    reference_trajectory: List[Vec3] = Field(..., min_length=2)
    obstacle_points: Optional[List[Vec3]] = None
    gate_center: Optional[Vec3] = None
    gaussians: List[GaussianSchema] = Field(default_factory=list)

    @field_validator("waypoints")
    @classmethod
    def increasing_x(cls, v):
        xs = [w[0] for w in v]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("waypoints must be strictly increasing in x")
        return v
