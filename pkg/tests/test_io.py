"""
Tests for image and table helpers.
"""
import numpy as np
import pytest

from gradnav.utils.io import append_csv, read_csv, read_pfm, read_ppm, to_uint8, write_pfm, write_ppm


def test_to_uint8_rounds_and_clips():
    """Test quantization of float images to 8 bits."""
    image = np.array([[[-0.5, 0.0, 1.0], [0.5, 1.7, 0.2]]])
    np.testing.assert_array_equal(to_uint8(image), [[[0, 0, 255], [128, 255, 51]]])


def test_ppm_round_trip(tmp_path):
    """Test that a written PPM reads back byte for byte."""
    rng = np.random.default_rng(0)
    image = rng.integers(0, 256, size=(5, 7, 3), dtype=np.uint8)
    path = write_ppm(tmp_path / "img.ppm", image)
    assert path.read_bytes().startswith(b"P6\n7 5\n255\n")
    np.testing.assert_array_equal(read_ppm(path), image)


def test_ppm_rejects_wrong_shape(tmp_path):
    """Test that non-RGB arrays are refused."""
    with pytest.raises(ValueError):
        write_ppm(tmp_path / "img.ppm", np.zeros((4, 4)))


def test_pfm_round_trip_keeps_row_order(tmp_path):
    """Test that PFM depth maps read back top row first."""
    depth = np.arange(12, dtype=np.float64).reshape(3, 4) * 0.25
    path = write_pfm(tmp_path / "depth.pfm", depth)
    np.testing.assert_array_equal(read_pfm(path), depth)


def test_missing_image_raises(tmp_path):
    """Test that reading a missing file raises FileNotFoundError."""
    with pytest.raises(FileNotFoundError):
        read_ppm(tmp_path / "none.ppm")
    with pytest.raises(FileNotFoundError):
        read_pfm(tmp_path / "none.pfm")


def test_append_csv_writes_header_once(tmp_path):
    """Test that appending rows keeps a single header."""
    path = tmp_path / "metrics.csv"
    append_csv(path, {"epoch": 0, "reward": 1.5})
    append_csv(path, [{"epoch": 1, "reward": 2.0}, {"epoch": 2, "reward": 2.5}])
    table = read_csv(path)
    assert list(table.columns) == ["epoch", "reward"]
    assert table["epoch"].tolist() == [0, 1, 2]
    assert path.read_text().count("epoch") == 1
