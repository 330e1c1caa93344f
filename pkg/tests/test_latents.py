"""
Tests for the principal-component analysis of context latents.
"""
import numpy as np
import pandas as pd
import pytest

from gradnav.services.latent_analysis import (
    analyze_latents,
    analyze_trace_dir,
    latent_columns,
    load_traces,
    principal_components,
)


def _frame(z, stages=None):
    frame = pd.DataFrame(z, columns=[f"z{j}" for j in range(z.shape[1])])
    if stages is not None:
        frame["stage"] = stages
    return frame


def test_recovers_planted_subspace():
    """Test that the top two directions span a planted 2D subspace of R^16."""
    rng = np.random.default_rng(0)
    basis, _ = np.linalg.qr(rng.normal(size=(16, 2)))
    coords = rng.normal(size=(400, 2)) * np.array([3.0, 1.5])
    data = coords @ basis.T + 0.01 * rng.normal(size=(400, 16))
    components, variances = principal_components(data)
    assert variances[0] > variances[1] > 0
    for v in components:
        in_plane = np.linalg.norm(basis.T @ v)
        angle = np.degrees(np.arccos(min(in_plane, 1.0)))
        assert angle < 1.0
    np.testing.assert_allclose(components @ components.T, np.eye(2), atol=1e-8)


def test_component_sign_convention():
    """Test that each direction's largest entry is positive."""
    rng = np.random.default_rng(1)
    data = rng.normal(size=(50, 5)) * np.array([5.0, 1.0, 1.0, 1.0, 1.0])
    components, _ = principal_components(-data)
    for v in components:
        assert v[np.argmax(np.abs(v))] > 0


def test_zero_variance_falls_back_to_orthogonal_unit_vectors():
    """Test constant latents: zero variances and orthonormal directions."""
    components, variances = principal_components(np.ones((10, 4)))
    np.testing.assert_array_equal(variances, [0.0, 0.0])
    np.testing.assert_allclose(components @ components.T, np.eye(2), atol=1e-12)


def test_analyze_latents_projection_and_scatter():
    """Test the per-stage projection table and scatter values."""
    rng = np.random.default_rng(2)
    z = rng.normal(size=(30, 16))
    stages = ["approaching"] * 10 + ["passing"] * 10 + ["after"] * 10
    analysis = analyze_latents(_frame(z, stages))
    assert list(analysis.projection.columns) == ["stage", "pc1", "pc2"]
    assert len(analysis.projection) == 30
    assert set(analysis.scatter) == {"approaching", "passing", "after"}
    assert analysis.components.shape == (2, 16)


def test_analyze_latents_without_stage_column():
    """Test that unlabeled latents fall into a single group."""
    analysis = analyze_latents(_frame(np.random.default_rng(3).normal(size=(5, 3))))
    assert set(analysis.projection["stage"]) == {"all"}


def test_analyze_latents_rejects_small_or_empty_input():
    """Test the minimum sample count and the latent-column requirement."""
    with pytest.raises(ValueError):
        analyze_latents(_frame(np.zeros((2, 4))))
    with pytest.raises(ValueError):
        analyze_latents(pd.DataFrame({"px": [1.0, 2.0, 3.0]}))


def test_latent_columns_are_numerically_ordered():
    """Test that z10 sorts after z2."""
    frame = pd.DataFrame(columns=["z10", "px", "z2", "z0", "zeta"])
    assert latent_columns(frame) == ["z0", "z2", "z10"]


def test_analyze_trace_dir(tmp_path):
    """Test reading trace files from a directory and saving the projection."""
    rng = np.random.default_rng(4)
    for i in range(2):
        _frame(rng.normal(size=(4, 3)), ["passing"] * 4).to_csv(tmp_path / f"trace_{i:03d}.csv", index=False)
    assert len(load_traces(tmp_path)) == 8
    analysis = analyze_trace_dir(tmp_path, tmp_path / "out" / "pca.csv")
    assert (tmp_path / "out" / "pca.csv").is_file()
    assert len(analysis.projection) == 8
    with pytest.raises(FileNotFoundError):
        load_traces(tmp_path / "out")
