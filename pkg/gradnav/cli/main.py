"""
Entry point of the ``gradnav`` command.

Exit codes: 0 on success, 2 for usage or configuration errors (invalid values,
missing files), 1 for any other failure.
"""
import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from gradnav.cli.commands import benchmark, evaluate, latents, render, scene, timing, train
from gradnav.core.config import settings
from gradnav.utils.logger import setup_logger

logger = logging.getLogger(__name__)

COMMANDS = (train, evaluate, scene, render, benchmark, timing, latents)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gradnav",
        description="Differentiable drone navigation: simulation, training and evaluation",
    )
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ERROR (default: GRADNAV_LOG_LEVEL or INFO)")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        setup_logger("gradnav", args.log_level or settings.log_level)
    except ValueError as exc:
        parser.error(str(exc))

    try:
        return args.handler(args)
    except (ValidationError, ValueError, FileNotFoundError) as exc:
        logger.error(f"{args.command}: {exc}")
        return 2
    except Exception:
        logger.exception(f"{args.command} failed")
        return 1


if __name__ == "__main__":
    sys.exit(main())
