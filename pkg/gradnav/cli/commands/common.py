"""
Argument groups and loaders shared by the subcommands.
"""
import argparse
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from gradnav.core.config import Settings, load_settings
from gradnav.models.scene import Scene
from gradnav.services.scene_service import curriculum_scenes, load_scene, make_gate_scene

logger = logging.getLogger(__name__)


def add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="YAML run configuration")
    parser.add_argument("--seed", type=int, default=None, help="Run seed (overrides the config)")


def settings_from_args(args: argparse.Namespace, **sections: Dict[str, Any]) -> Settings:
    """
    Load settings from ``--config`` with flag overrides on top.

    ``sections`` are nested overrides, e.g. ``train={"algo": "ppo"}``; empty
    sections are dropped so file values survive.
    """
    overrides: Dict[str, Any] = {name: values for name, values in sections.items() if values}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "out", None) is not None and getattr(args, "out_is_run_root", False):
        overrides["output_dir"] = str(args.out)
    return load_settings(getattr(args, "config", None), **overrides)


def resolve_scenes(paths: Optional[Sequence[Path]], settings: Settings, curriculum: bool = False) -> List[Scene]:
    """
    Scenes from explicit paths, then ``settings.scenes``, then the built-in gate scenes.

    Raises:
        FileNotFoundError: naming the first missing scene file
    """
    files = [Path(p) for p in (paths or settings.scenes)]
    if files:
        return [load_scene(f) for f in files]
    if curriculum:
        logger.info("No scene files given; using the built-in left/middle/right gate scenes")
        return curriculum_scenes(settings.seed)
    logger.info("No scene file given; using the built-in centered gate scene")
    return [make_gate_scene(0.0, distractor_seed=settings.seed)]
