"""
``gradnav benchmark``: all three trainers at a matched sample budget.
"""
import argparse
from pathlib import Path

from gradnav.cli.commands.common import add_config_arguments, resolve_scenes, settings_from_args
from gradnav.services.benchmark import ALGORITHMS, run_benchmark, summarize_benchmark


def register(subparsers) -> None:
    parser = subparsers.add_parser("benchmark", help="Compare short-horizon actor-critic, BPTT and PPO")
    add_config_arguments(parser)
    parser.add_argument("--scene", type=Path, default=None)
    parser.add_argument("--budget", type=int, required=True, help="Environment steps per run")
    parser.add_argument("--seeds", type=int, default=3, help="Number of seeds, counted up from --seed")
    parser.add_argument("--algos", nargs="+", choices=ALGORITHMS, default=list(ALGORITHMS))
    parser.add_argument("--out", type=Path, default=None, help="Output root")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    if args.seeds < 1:
        raise ValueError(f"--seeds must be at least 1, got {args.seeds}")
    settings = settings_from_args(args)
    scenes = resolve_scenes([args.scene] if args.scene else None, settings)
    seeds = [settings.seed + k for k in range(args.seeds)]
    table = run_benchmark(settings, scenes, args.budget, seeds, output_dir=args.out, algorithms=args.algos)
    print(summarize_benchmark(table).to_string(index=False))
    return 0
