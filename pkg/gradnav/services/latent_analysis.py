"""
Principal-component view of the context latents logged during evaluation.
"""
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
LATENT_COLUMN = re.compile(r"^z(\d+)$")
MIN_SAMPLES = 3


@dataclass
class LatentAnalysis:
    """
    Attributes:
        projection: one row per sample with columns stage, pc1, pc2
        components: (2, d) principal directions
        explained_variance: (2,) variance along each direction
        scatter: per-stage mean distance to the stage centroid in PC space
    """

    projection: pd.DataFrame
    components: np.ndarray
    explained_variance: np.ndarray
    scatter: Dict[str, float]

    def save(self, path: PathLike) -> Path:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        self.projection.to_csv(target, index=False)
        return target


def latent_columns(frame: pd.DataFrame) -> list:
    """``z0 .. z{d-1}`` columns in index order."""
    matches = [(int(m.group(1)), c) for c in frame.columns if (m := LATENT_COLUMN.match(str(c)))]
    return [c for _, c in sorted(matches)]


def principal_components(
    data: np.ndarray,
    k: int = 2,
    iterations: int = 1000,
    tol: float = 1e-12,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Top-k principal directions by deflated power iteration.

    The start vector is fixed so results are reproducible. Directions whose
    variance vanishes fall back to unit vectors orthogonal to the ones found.
    Each direction's largest-magnitude entry is positive.

    Returns:
        (components (k, d), variances (k,))
    """
    data = np.asarray(data, dtype=np.float64)
    m, d = data.shape
    centered = data - data.mean(axis=0)
    cov = centered.T @ centered / max(m - 1, 1)
    scale = max(float(np.abs(cov).max()), 1.0)

    components = np.zeros((k, d))
    variances = np.zeros(k)
    residual = cov.copy()
    for i in range(k):
        v = np.linspace(1.0, 2.0, d)
        v = _orthogonalize(v, components[:i])
        v /= np.linalg.norm(v)
        variance = 0.0
        for _ in range(iterations):
            w = _orthogonalize(residual @ v, components[:i])
            norm = np.linalg.norm(w)
            if norm <= 1e-12 * scale:
                variance = 0.0
                v = _fallback_direction(components[:i], d)
                break
            w /= norm
            converged = min(np.linalg.norm(w - v), np.linalg.norm(w + v)) < tol
            v = w
            variance = float(v @ residual @ v)
            if converged:
                break
        pivot = np.argmax(np.abs(v))
        if v[pivot] < 0:
            v = -v
        components[i] = v
        variances[i] = max(variance, 0.0)
        residual = residual - variances[i] * np.outer(v, v)
    return components, variances


def _orthogonalize(v: np.ndarray, basis: np.ndarray) -> np.ndarray:
    for b in basis:
        v = v - (v @ b) * b
    return v


def _fallback_direction(basis: np.ndarray, d: int) -> np.ndarray:
    for j in range(d):
        candidate = _orthogonalize(np.eye(d)[j], basis)
        norm = np.linalg.norm(candidate)
        if norm > 1e-6:
            return candidate / norm
    return np.zeros(d)


def analyze_latents(frame: pd.DataFrame) -> LatentAnalysis:
    """
    Project logged latents onto their top two principal components.

    Args:
        frame: rows with ``z0 .. z{d-1}`` columns and an optional ``stage`` label

    Raises:
        ValueError: with fewer than 3 samples or no latent columns
    """
    columns = latent_columns(frame)
    if not columns:
        raise ValueError("no latent columns (z0, z1, ...) in the logged data")
    if len(frame) < MIN_SAMPLES:
        raise ValueError(f"latent analysis needs at least {MIN_SAMPLES} samples, got {len(frame)}")

    z = frame[columns].to_numpy(dtype=np.float64)
    components, variances = principal_components(z, k=min(2, z.shape[1]))
    coords = (z - z.mean(axis=0)) @ components.T
    if coords.shape[1] == 1:
        coords = np.concatenate([coords, np.zeros((len(coords), 1))], axis=1)
        components = np.concatenate([components, np.zeros((1, components.shape[1]))])
        variances = np.append(variances, 0.0)

    stages = frame["stage"].astype(str).to_numpy() if "stage" in frame else np.full(len(frame), "all", dtype=object)
    projection = pd.DataFrame({"stage": stages, "pc1": coords[:, 0], "pc2": coords[:, 1]})

    scatter = {}
    for stage, group in projection.groupby("stage", sort=False):
        points = group[["pc1", "pc2"]].to_numpy()
        scatter[str(stage)] = float(np.linalg.norm(points - points.mean(axis=0), axis=1).mean())

    logger.info(
        f"Latent PCA over {len(frame)} samples, {len(columns)} dims: "
        f"variance {variances[0]:.4g} / {variances[1]:.4g}; scatter {scatter}"
    )
    return LatentAnalysis(projection, components, variances, scatter)


def load_traces(directory: PathLike, pattern: str = "trace_*.csv") -> pd.DataFrame:
    """Concatenate evaluation traces in file-name order."""
    root = Path(directory)
    files = sorted(root.glob(pattern))
    if not files:
        raise FileNotFoundError(f"no files matching '{pattern}' in {root}")
    return pd.concat([pd.read_csv(f) for f in files], ignore_index=True)


def analyze_trace_dir(directory: PathLike, output: Optional[PathLike] = None) -> LatentAnalysis:
    analysis = analyze_latents(load_traces(directory))
    if output is not None:
        analysis.save(output)
    return analysis
