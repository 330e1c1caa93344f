from pydantic import BaseModel, ConfigDict


class BaseSchema(BaseModel):
    """Base schema with common settings."""

    model_config = ConfigDict(
        from_attributes=True,
        populate_by_name=True,
        extra="forbid",
        validate_assignment=True,
    )
