"""
``gradnav analyze-latents``: PCA of the latents logged in evaluation traces.
"""
import argparse
from pathlib import Path

from gradnav.services.latent_analysis import analyze_trace_dir


def register(subparsers) -> None:
    parser = subparsers.add_parser("analyze-latents", help="Project logged latents onto two principal components")
    parser.add_argument("--traces", type=Path, required=True, help="Directory of trace_*.csv files")
    parser.add_argument("--out", type=Path, required=True, help="CSV of (stage, pc1, pc2)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    analysis = analyze_trace_dir(args.traces, args.out)
    print(f"explained variance: {analysis.explained_variance[0]:.4g}, {analysis.explained_variance[1]:.4g}")
    for stage, spread in analysis.scatter.items():
        print(f"{stage}: scatter {spread:.4f}")
    print(f"wrote {args.out}")
    return 0
