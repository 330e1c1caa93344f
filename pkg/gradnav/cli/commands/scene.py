"""
``gradnav make-scene``: write a procedural gate (or hover) scene file.
"""
import argparse
from pathlib import Path

from gradnav.services.scene_service import make_gate_scene, make_hover_scene, save_scene


def register(subparsers) -> None:
    parser = subparsers.add_parser("make-scene", help="Write a procedural scene file")
    parser.add_argument("--gate-y", type=float, default=0.0, help="Lateral offset of the gate opening, m")
    parser.add_argument("--seed", type=int, default=0, help="Seed of the clutter layout")
    parser.add_argument("--distractors", type=int, default=12)
    parser.add_argument("--hover", action="store_true", help="Obstacle-free room instead of a gate scene")
    parser.add_argument("--out", type=Path, required=True, help="Scene file to write")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    if args.hover:
        scene = make_hover_scene()
    else:
        scene = make_gate_scene(args.gate_y, distractor_seed=args.seed, distractors=args.distractors)
    path = save_scene(scene, args.out)
    print(f"wrote {path} ({len(scene.gaussians)} Gaussians)")
    return 0
