"""
Matched-sample comparison of short-horizon actor-critic, BPTT and PPO.

Each algorithm gets the same environment-step budget; its epoch count is the
budget divided by the samples one epoch collects. Per-epoch metrics and wall
clock of every run are merged into one long-format table.
"""
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Union

import pandas as pd

from gradnav.core.config import Settings
from gradnav.models.scene import Scene
from gradnav.services.trainers import TRAINERS, make_trainer
from gradnav.utils.io import read_csv

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
ALGORITHMS = ("gradnav", "bptt", "ppo")
BENCHMARK_COLUMNS = ["algo", "seed", "epoch", "samples", "wallclock_s", "episode_reward", "step_reward"]


def algorithm_settings(settings: Settings, algo: str, seed: int, budget: int) -> Settings:
    """
    Settings for one benchmark run: algorithm, seed and an epoch count that spends ``budget`` steps.

    Raises:
        ValueError: for an unknown algorithm or a budget smaller than one epoch
    """
    if algo not in TRAINERS:
        raise ValueError(f"unknown algorithm '{algo}', expected one of {sorted(TRAINERS)}")
    train = settings.train.model_copy(update={"algo": algo, "horizon": None if algo == "bptt" else settings.train.horizon})
    staged = settings.model_copy(update={"train": train, "seed": seed})
    per_epoch = staged.n_envs * staged.horizon
    if budget < per_epoch:
        raise ValueError(f"budget {budget} is smaller than one {algo} epoch ({per_epoch} steps)")
    train = train.model_copy(update={"epochs": budget // per_epoch})
    return staged.model_copy(update={"train": train})


def run_benchmark(
    settings: Settings,
    scenes: Sequence[Scene],
    budget: int,
    seeds: Sequence[int] = (0, 1, 2),
    output_dir: Optional[PathLike] = None,
    algorithms: Sequence[str] = ALGORITHMS,
) -> pd.DataFrame:
    """
    Train every algorithm under every seed at a matched step budget.

    Args:
        settings: shared settings; ``train.algo``, ``seed`` and ``train.epochs`` are replaced per run
        scenes: training scenes
        budget: environment steps per run
        seeds: run seeds
        output_dir: root of the per-run directories and ``benchmark.csv``

    Returns:
        One row per (algorithm, seed, epoch) with columns ``BENCHMARK_COLUMNS``
    """
    root = Path(output_dir or settings.output_dir) / "benchmark"
    frames: List[pd.DataFrame] = []
    for algo in algorithms:
        for seed in seeds:
            run_settings = algorithm_settings(settings, algo, seed, budget)
            logger.info(f"Benchmark run {algo} seed {seed}: {run_settings.train.epochs} epochs")
            result = make_trainer(run_settings, scenes, run_dir=root / f"{algo}_seed{seed}").train()
            timing = read_csv(result.run_dir / "timing.csv")[["epoch", "wallclock_s"]]
            merged = result.metrics.merge(timing, on="epoch", how="left")
            merged["algo"] = algo
            merged["seed"] = seed
            merged = merged.rename(columns={"steps": "samples"})
            frames.append(merged[BENCHMARK_COLUMNS])

    table = pd.concat(frames, ignore_index=True)
    root.mkdir(parents=True, exist_ok=True)
    table.to_csv(root / "benchmark.csv", index=False)
    logger.info(f"Benchmark table written to {root / 'benchmark.csv'}")
    return table


def summarize_benchmark(table: pd.DataFrame) -> pd.DataFrame:
    """Per algorithm: final-epoch reward (mean/std over seeds), best reward and total wall clock."""
    final = table.sort_values("epoch").groupby(["algo", "seed"]).tail(1)
    summary = final.groupby("algo").agg(
        final_reward_mean=("episode_reward", "mean"),
        final_reward_std=("episode_reward", "std"),
        samples=("samples", "max"),
        wallclock_s=("wallclock_s", "mean"),
    )
    summary["best_reward"] = table.groupby("algo")["episode_reward"].max()
    return summary.reset_index()
