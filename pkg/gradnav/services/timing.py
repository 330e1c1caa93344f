"""
Per-step compute breakdown of the environment: dynamics, rendering and collision.
"""
import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional

import numpy as np
import pandas as pd

from gradnav.diffcore import Tensor, no_grad

logger = logging.getLogger(__name__)

PHASES = ("dynamics", "rendering", "collision")


@dataclass
class StepTimings:
    """Accumulated wall-clock seconds per simulation phase."""

    dynamics: float = 0.0
    rendering: float = 0.0
    collision: float = 0.0
    steps: int = 0

    @contextmanager
    def measure(self, phase: str) -> Iterator[None]:
        if phase not in PHASES:
            raise ValueError(f"unknown timing phase '{phase}', expected one of {PHASES}")
        start = time.perf_counter()
        try:
            yield
        finally:
            setattr(self, phase, getattr(self, phase) + time.perf_counter() - start)

    @property
    def total(self) -> float:
        return self.dynamics + self.rendering + self.collision

    def percentages(self) -> Dict[str, float]:
        """Share of each phase in percent; all zeros before anything was measured."""
        total = self.total
        if total <= 0:
            return {phase: 0.0 for phase in PHASES}
        return {phase: 100.0 * getattr(self, phase) / total for phase in PHASES}

    def to_dict(self) -> Dict[str, float]:
        row = {f"{phase}_s": getattr(self, phase) for phase in PHASES}
        row["steps"] = self.steps
        return row

    def reset(self) -> None:
        self.dynamics = self.rendering = self.collision = 0.0
        self.steps = 0


@dataclass
class TimingReport:
    """Result of a timing measurement over a fixed number of steps."""

    n_envs: int
    steps: int
    timings: StepTimings
    step_seconds: List[float] = field(default_factory=list)

    @property
    def mean_step_ms(self) -> float:
        return 1000.0 * float(np.mean(self.step_seconds)) if self.step_seconds else 0.0

    def table(self) -> pd.DataFrame:
        shares = self.timings.percentages()
        return pd.DataFrame(
            [
                {
                    "component": phase,
                    "seconds": getattr(self.timings, phase),
                    "ms_per_step": 1000.0 * getattr(self.timings, phase) / max(self.steps, 1),
                    "percent": shares[phase],
                }
                for phase in PHASES
            ]
        )


def measure_step_timing(env, steps: int = 100, actions: Optional[np.ndarray] = None) -> TimingReport:
    """
    Step an environment with fixed actions and report the phase split.

    Args:
        env: a NavigationEnv
        steps: number of batched steps
        actions: (n, 4) actions applied every step; zeros (hover) by default

    Returns:
        TimingReport over exactly ``steps`` steps
    """
    if steps < 1:
        raise ValueError(f"steps must be at least 1, got {steps}")
    env.reset()
    env.timings.reset()
    fixed = np.zeros((env.n_envs, 4)) if actions is None else np.asarray(actions, dtype=np.float64)
    durations = []
    with no_grad():
        for _ in range(steps):
            env.reset_done()
            start = time.perf_counter()
            env.step(Tensor(fixed))
            durations.append(time.perf_counter() - start)
            env.detach_state()
    report = TimingReport(n_envs=env.n_envs, steps=steps, timings=env.timings, step_seconds=durations)
    shares = report.timings.percentages()
    logger.info(
        f"Timing over {steps} steps x {env.n_envs} envs: "
        + ", ".join(f"{k} {v:.1f}%" for k, v in shares.items())
        + f" ({report.mean_step_ms:.1f} ms/step)"
    )
    return report
