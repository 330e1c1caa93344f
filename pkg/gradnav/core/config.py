"""
Run settings.

Sources, highest precedence first: keyword overrides (command-line flags),
``GRADNAV_*`` environment variables, the ``.env`` file, the YAML run config,
and finally the model defaults.
"""
from pathlib import Path
from typing import Any, List, Optional, Tuple, Type, Union

import yaml
from pydantic import Field
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
    YamlConfigSettingsSource,
)

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


class Settings(BaseSettings):
    """Resolved configuration of one run."""

    # Application
    app_name: str = "gradnav"
    log_level: str = "INFO"
    seed: int = 0
    output_dir: str = "runs"
    scenes: List[str] = Field(default_factory=list, description="Scene files, in curriculum order")

    # Sections
    dynamics: DynamicsConfig = Field(default_factory=DynamicsConfig)
    randomization: RandomizationRanges = Field(default_factory=RandomizationRanges)
    camera: CameraConfig = Field(default_factory=CameraConfig)
    env: EnvConfig = Field(default_factory=EnvConfig)
    reward: RewardWeights = Field(default_factory=RewardWeights)
    net: NetConfig = Field(default_factory=NetConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    curriculum: CurriculumConfig = Field(default_factory=CurriculumConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)

    model_config = SettingsConfigDict(
        env_prefix="GRADNAV_",
        env_nested_delimiter="__",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        sources: List[PydanticBaseSettingsSource] = [init_settings, env_settings, dotenv_settings]
        if settings_cls.model_config.get("yaml_file"):
            sources.append(YamlConfigSettingsSource(settings_cls))
        return tuple(sources)

    @property
    def n_envs(self) -> int:
        return self.train.resolve_n_envs(self.env.n_envs)

    @property
    def horizon(self) -> int:
        return self.train.resolve_horizon(self.env.episode_length)


def load_settings(path: Optional[Union[str, Path]] = None, **overrides: Any) -> Settings:
    """
    Build validated settings from an optional YAML file plus overrides.

    Args:
        path: YAML run-config file (sections as in ``Settings``)
        **overrides: top-level fields; nested sections may be given as dicts
            and are merged into the file's values

    Returns:
        Validated settings

    Raises:
        FileNotFoundError: if ``path`` does not exist
        pydantic.ValidationError: if any field is invalid
    """
    if path is None:
        return Settings(**overrides)

    config_path = Path(path)
    if not config_path.is_file():
        raise FileNotFoundError(f"Config file not found: {config_path}")

    class FileSettings(Settings):
        model_config = SettingsConfigDict(yaml_file=str(config_path))

    return FileSettings(**overrides)


def dump_settings(settings: Settings, path: Union[str, Path]) -> Path:
    """Write the fully resolved settings as YAML; loading it back reproduces the run."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8") as handle:
        yaml.safe_dump(settings.model_dump(mode="json"), handle, sort_keys=False)
    return target


# Global settings instance
settings = Settings()
