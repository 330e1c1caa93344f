"""
``gradnav timing``: per-step cost split between dynamics, rendering and collision queries.
"""
import argparse
from pathlib import Path

from gradnav.cli.commands.common import add_config_arguments, resolve_scenes, settings_from_args
from gradnav.services.environment import NavigationEnv
from gradnav.services.timing import measure_step_timing


def register(subparsers) -> None:
    parser = subparsers.add_parser("timing", help="Measure the simulation step cost breakdown")
    add_config_arguments(parser)
    parser.add_argument("--scene", type=Path, default=None)
    parser.add_argument("--n-envs", type=int, default=128)
    parser.add_argument("--steps", type=int, default=100)
    parser.add_argument("--out", type=Path, default=None, help="Optional CSV of the table")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    if args.n_envs < 1:
        raise ValueError(f"--n-envs must be at least 1, got {args.n_envs}")
    settings = settings_from_args(args)
    scene = resolve_scenes([args.scene] if args.scene else None, settings)[0]
    env = NavigationEnv.from_settings(settings, scene, n_envs=args.n_envs, seed=settings.seed)
    report = measure_step_timing(env, steps=args.steps)
    table = report.table()
    print(table.to_string(index=False, float_format=lambda v: f"{v:.3f}"))
    print(f"mean step: {report.mean_step_ms:.2f} ms for {report.n_envs} envs")
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(args.out, index=False)
    return 0
