"""
``gradnav eval``: success rate and return statistics of a checkpoint (or the scripted tracker).
"""
import argparse
import logging
from pathlib import Path
from typing import Optional

from gradnav.cli.commands.common import resolve_scenes, settings_from_args
from gradnav.services.evaluation import AgentController, ReferenceTrackingController, evaluate, load_agent

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("eval", help="Evaluate a trained policy")
    parser.add_argument("--checkpoint", type=Path, default=None, help="Checkpoint directory")
    parser.add_argument("--config", type=Path, default=None, help="Run config (default: the checkpoint's run config)")
    parser.add_argument("--scene", type=Path, default=None, help="Scene file")
    parser.add_argument("--n", type=int, default=None, help="Number of rollouts")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", type=Path, default=None, help="Directory for trajectory traces")
    parser.add_argument(
        "--controller",
        choices=("agent", "reference"),
        default="agent",
        help="'reference' flies the scripted reference-tracking controller",
    )
    parser.set_defaults(handler=run)


def _run_config(checkpoint: Optional[Path]) -> Optional[Path]:
    if checkpoint is None:
        return None
    candidate = checkpoint.parent.parent / "config.yaml"
    return candidate if candidate.is_file() else None


def run(args: argparse.Namespace) -> int:
    if args.controller == "agent" and args.checkpoint is None:
        raise ValueError("--checkpoint is required unless --controller reference is used")
    if args.config is None:
        args.config = _run_config(args.checkpoint)
    settings = settings_from_args(args)
    scene = resolve_scenes([args.scene] if args.scene else None, settings)[0]

    if args.controller == "agent":
        controller = AgentController(load_agent(args.checkpoint, settings))
    else:
        controller = ReferenceTrackingController(scene)

    trace_dir = args.out
    if trace_dir is None and args.checkpoint is not None:
        trace_dir = args.checkpoint.parent.parent / "eval"
    result = evaluate(controller, scene, settings, n=args.n, seed=args.seed, trace_dir=trace_dir)
    print(f"success: {result.success_line}")
    print(f"reward: {result.reward_mean:.3f} +- {result.reward_std:.3f}")
    if result.traces:
        print(f"traces: {result.traces[0].parent}")
    return 0
