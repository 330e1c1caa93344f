"""
File helpers: PPM/PFM images and append-only CSV tables.
"""
import logging
from pathlib import Path
from typing import Any, List, Mapping, Sequence, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def to_uint8(image: np.ndarray) -> np.ndarray:
    """Quantize an RGB image in [0, 1] to 8 bits (round half to even, clipped)."""
    if image.dtype == np.uint8:
        return image
    return np.clip(np.rint(np.asarray(image, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def write_ppm(path: PathLike, image: np.ndarray) -> Path:
    """
    Write an (H, W, 3) RGB image as binary PPM (P6, maxval 255).

    Float images are taken to be in [0, 1].
    """
    pixels = to_uint8(np.asarray(image))
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ValueError(f"PPM needs an (H, W, 3) image, got shape {pixels.shape}")
    height, width = pixels.shape[:2]
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "wb") as handle:
        handle.write(f"P6\n{width} {height}\n255\n".encode("ascii"))
        handle.write(np.ascontiguousarray(pixels).tobytes())
    return target


def _read_header_tokens(handle, count: int) -> List[bytes]:
    tokens: List[bytes] = []
    while len(tokens) < count:
        line = handle.readline()
        if not line:
            raise ValueError("Unexpected end of file in image header")
        line = line.split(b"#", 1)[0]
        tokens.extend(line.split())
    return tokens


def read_ppm(path: PathLike) -> np.ndarray:
    """Read a binary PPM written by ``write_ppm`` into an (H, W, 3) uint8 array."""
    source = Path(path)
    if not source.is_file():
        raise FileNotFoundError(f"Image not found: {source}")
    with open(source, "rb") as handle:
        magic, width, height, maxval = _read_header_tokens(handle, 4)
        if magic != b"P6" or int(maxval) != 255:
            raise ValueError(f"{source}: not an 8-bit binary PPM")
        width, height = int(width), int(height)
        data = handle.read(width * height * 3)
    if len(data) != width * height * 3:
        raise ValueError(f"{source}: truncated pixel data")
    return np.frombuffer(data, dtype=np.uint8).reshape(height, width, 3).copy()


def write_pfm(path: PathLike, depth: np.ndarray) -> Path:
    """Write an (H, W) float image as little-endian greyscale PFM (rows stored bottom-up)."""
    image = np.asarray(depth, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError(f"PFM needs an (H, W) image, got shape {image.shape}")
    height, width = image.shape
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "wb") as handle:
        handle.write(f"Pf\n{width} {height}\n-1.0\n".encode("ascii"))
        handle.write(np.flipud(image).astype("<f4").tobytes())
    return target


def read_pfm(path: PathLike) -> np.ndarray:
    """Read a greyscale PFM into an (H, W) float64 array, top row first."""
    source = Path(path)
    if not source.is_file():
        raise FileNotFoundError(f"Image not found: {source}")
    with open(source, "rb") as handle:
        magic, width, height, scale = _read_header_tokens(handle, 4)
        if magic != b"Pf":
            raise ValueError(f"{source}: not a greyscale PFM")
        width, height = int(width), int(height)
        dtype = "<f4" if float(scale) < 0 else ">f4"
        data = handle.read(width * height * 4)
    if len(data) != width * height * 4:
        raise ValueError(f"{source}: truncated pixel data")
    return np.flipud(np.frombuffer(data, dtype=dtype).reshape(height, width)).astype(np.float64)


def append_csv(path: PathLike, rows: Union[Mapping[str, Any], Sequence[Mapping[str, Any]], pd.DataFrame]) -> Path:
    """
    Append rows to a CSV table, writing the header only when the file is new.

    Args:
        path: Target file
        rows: One row, a list of rows, or a DataFrame

    Returns:
        Path of the table
    """
    if isinstance(rows, pd.DataFrame):
        frame = rows
    elif isinstance(rows, Mapping):
        frame = pd.DataFrame([dict(rows)])
    else:
        frame = pd.DataFrame([dict(r) for r in rows])
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    exists = target.exists() and target.stat().st_size > 0
    frame.to_csv(target, mode="a", header=not exists, index=False)
    return target


def read_csv(path: PathLike) -> pd.DataFrame:
    source = Path(path)
    if not source.is_file():
        raise FileNotFoundError(f"Table not found: {source}")
    return pd.read_csv(source)
