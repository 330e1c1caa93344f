"""
``gradnav render``: one RGB (PPM) and depth (PFM) view of a scene.
"""
import argparse
from pathlib import Path

import numpy as np

from gradnav.cli.commands.common import settings_from_args
from gradnav.models.scene import Camera
from gradnav.services.renderer import GaussianRenderer
from gradnav.services.scene_service import load_scene
from gradnav.utils.io import write_pfm, write_ppm


def register(subparsers) -> None:
    parser = subparsers.add_parser("render", help="Render a view of a scene")
    parser.add_argument("--config", type=Path, default=None, help="Run config supplying the camera")
    parser.add_argument("--scene", type=Path, required=True)
    parser.add_argument(
        "--pose",
        type=float,
        nargs=7,
        metavar=("X", "Y", "Z", "QW", "QX", "QY", "QZ"),
        default=(0.0, 0.0, 1.3, 1.0, 0.0, 0.0, 0.0),
        help="Body position and orientation quaternion (scalar first)",
    )
    parser.add_argument("--out", type=Path, required=True, help="Output prefix; writes <prefix>.ppm and <prefix>.pfm")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    settings = settings_from_args(args)
    scene = load_scene(args.scene)
    pose = np.asarray(args.pose, dtype=np.float64)
    if np.linalg.norm(pose[3:]) < 1e-12:
        raise ValueError("pose quaternion must be non-zero")
    renderer = GaussianRenderer(Camera.from_config(settings.camera))
    rgb, depth = renderer.render(scene, pose[:3], pose[3:])
    ppm = write_ppm(args.out.with_suffix(".ppm"), rgb)
    pfm = write_pfm(args.out.with_suffix(".pfm"), depth)
    print(f"wrote {ppm} and {pfm}")
    return 0
