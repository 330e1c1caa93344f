"""
Weight files and training checkpoints.

A weight file is a text header followed by raw data::

    GRADNAV-WEIGHTS 1
    <name> <shape as comma-separated extents, or "scalar">
    ...
    END
    <float64 little-endian values of every parameter, in header order>

A checkpoint is a directory holding ``agent.weights``, ``optimizer.weights``
and ``meta.yaml``.
"""
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

import numpy as np
import yaml
from pydantic import ValidationError

from gradnav.diffcore import Tensor
from gradnav.schemas.checkpoint import CheckpointMeta

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
MAGIC = "GRADNAV-WEIGHTS 1"
END = "END"


class CheckpointFormatError(ValueError):
    """Raised for malformed weight files or parameter/shape mismatches."""


def _as_array(value: Union[Tensor, np.ndarray]) -> np.ndarray:
    return value.data if isinstance(value, Tensor) else np.asarray(value, dtype=np.float64)


def _format_shape(shape: Tuple[int, ...]) -> str:
    return ",".join(str(d) for d in shape) if shape else "scalar"


def _parse_shape(text: str) -> Tuple[int, ...]:
    if text == "scalar":
        return ()
    return tuple(int(d) for d in text.split(","))


def save_weights(params: Mapping[str, Union[Tensor, np.ndarray]], path: PathLike) -> Path:
    """
    Write named arrays (or a network's parameters) in the weight-file format.

    Raises:
        ValueError: if a name contains whitespace
    """
    if hasattr(params, "parameters"):
        params = params.parameters()
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    lines = [MAGIC]
    for name, value in params.items():
        if not name or any(c.isspace() for c in name):
            raise ValueError(f"parameter name must be non-empty without whitespace: {name!r}")
        lines.append(f"{name} {_format_shape(_as_array(value).shape)}")
    lines.append(END)
    with open(target, "wb") as handle:
        handle.write(("\n".join(lines) + "\n").encode("ascii"))
        for value in params.values():
            handle.write(np.ascontiguousarray(_as_array(value), dtype="<f8").tobytes())
    return target


def read_weights(path: PathLike) -> Dict[str, np.ndarray]:
    """
    Read every array of a weight file, in header order.

    Raises:
        FileNotFoundError: if the file does not exist
        CheckpointFormatError: on a bad header, duplicate names or truncated data
    """
    source = Path(path)
    if not source.is_file():
        raise FileNotFoundError(f"Weight file not found: {source}")
    with open(source, "rb") as handle:
        first = handle.readline().decode("ascii", errors="replace").strip()
        if first != MAGIC:
            raise CheckpointFormatError(f"{source}: not a weight file (header {first!r})")
        entries = []
        seen = set()
        while True:
            raw = handle.readline()
            if not raw:
                raise CheckpointFormatError(f"{source}: header ends without {END}")
            line = raw.decode("ascii", errors="replace").strip()
            if line == END:
                break
            parts = line.split()
            if len(parts) != 2:
                raise CheckpointFormatError(f"{source}: malformed header line {line!r}")
            name, shape_text = parts
            if name in seen:
                raise CheckpointFormatError(f"{source}: parameter '{name}' listed twice")
            seen.add(name)
            try:
                entries.append((name, _parse_shape(shape_text)))
            except ValueError:
                raise CheckpointFormatError(f"{source}: bad shape {shape_text!r} for parameter '{name}'") from None

        arrays: Dict[str, np.ndarray] = {}
        for name, shape in entries:
            count = int(np.prod(shape)) if shape else 1
            data = handle.read(8 * count)
            if len(data) != 8 * count:
                raise CheckpointFormatError(f"{source}: truncated data for parameter '{name}'")
            arrays[name] = np.frombuffer(data, dtype="<f8").astype(np.float64).reshape(shape)
        if handle.read(1):
            raise CheckpointFormatError(f"{source}: trailing data after the last parameter")
    return arrays


def load_weights(params: Mapping[str, Tensor], path: PathLike) -> None:
    """
    Load a weight file into existing tensors (or a network's parameters).

    Raises:
        CheckpointFormatError: if names or shapes differ from ``params``
    """
    if hasattr(params, "parameters"):
        params = params.parameters()
    arrays = read_weights(path)
    missing = [name for name in params if name not in arrays]
    unexpected = [name for name in arrays if name not in params]
    if missing or unexpected:
        raise CheckpointFormatError(
            f"{path}: parameter mismatch (missing {missing}, unexpected {unexpected})"
        )
    for name, tensor in params.items():
        if arrays[name].shape != tensor.shape:
            raise CheckpointFormatError(
                f"{path}: parameter '{name}' has shape {arrays[name].shape}, expected {tensor.shape}"
            )
    for name, tensor in params.items():
        tensor.data = arrays[name].copy()


def save_checkpoint(
    directory: PathLike,
    agent_state: Mapping[str, np.ndarray],
    optimizer_state: Mapping[str, np.ndarray],
    meta: Mapping[str, Any],
) -> Path:
    record = CheckpointMeta.model_validate(dict(meta))
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    save_weights(agent_state, target / "agent.weights")
    save_weights(optimizer_state, target / "optimizer.weights")
    with open(target / "meta.yaml", "w", encoding="utf-8") as handle:
        yaml.safe_dump(record.model_dump(), handle, sort_keys=False)
    logger.info(f"Checkpoint written to {target}")
    return target


def load_checkpoint(directory: PathLike) -> Tuple[Dict[str, np.ndarray], Optional[Dict[str, np.ndarray]], Dict[str, Any]]:
    """
    Read a checkpoint directory.

    Returns:
        (agent arrays, optimizer arrays or None, metadata)
    """
    source = Path(directory)
    if not source.is_dir():
        raise FileNotFoundError(f"Checkpoint directory not found: {source}")
    meta_path = source / "meta.yaml"
    if not meta_path.is_file():
        raise FileNotFoundError(f"Checkpoint metadata not found: {meta_path}")
    with open(meta_path, "r", encoding="utf-8") as handle:
        raw = yaml.safe_load(handle) or {}
    try:
        meta = CheckpointMeta.model_validate(raw).model_dump()
    except ValidationError as exc:
        raise CheckpointFormatError(f"{meta_path}: invalid metadata: {exc}") from None
    agent = read_weights(source / "agent.weights")
    optimizer_path = source / "optimizer.weights"
    optimizer = read_weights(optimizer_path) if optimizer_path.is_file() else None
    return agent, optimizer, meta
