"""
``gradnav train``: run one trainer and write metrics, checkpoints and the resolved config.
"""
import argparse
import logging
from pathlib import Path

from gradnav.cli.commands.common import add_config_arguments, resolve_scenes, settings_from_args
from gradnav.services.trainers import TRAINERS, make_trainer

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("train", help="Train a navigation policy")
    add_config_arguments(parser)
    parser.add_argument("--algo", choices=sorted(TRAINERS), default=None, help="Training algorithm")
    parser.add_argument("--scene", type=Path, nargs="+", default=None, help="Scene file(s), in curriculum order")
    parser.add_argument("--curriculum", action="store_true", help="Rotate through the scenes")
    parser.add_argument("--epochs", type=int, default=None, help="Epochs (ignored with --curriculum)")
    parser.add_argument("--out", type=Path, default=None, help="Output root for run directories")
    parser.add_argument("--resume", type=Path, default=None, help="Checkpoint directory to warm-start from")
    parser.set_defaults(handler=run, out_is_run_root=True)


def run(args: argparse.Namespace) -> int:
    train = {}
    if args.algo is not None:
        train["algo"] = args.algo
    if args.epochs is not None:
        train["epochs"] = args.epochs
    curriculum = {"enabled": True} if args.curriculum else {}
    settings = settings_from_args(args, train=train, curriculum=curriculum)

    scenes = resolve_scenes(args.scene, settings, curriculum=settings.curriculum.enabled)
    trainer = make_trainer(settings, scenes)
    if args.resume is not None:
        trainer.resume(args.resume)
    result = trainer.train()
    print(f"run directory: {result.run_dir}")
    print(f"best episode reward: {result.best_reward:.3f}")
    print(f"last checkpoint: {result.last_checkpoint}")
    return 0
