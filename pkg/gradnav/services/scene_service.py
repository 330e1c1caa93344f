"""
Scene files and procedural gate scenes.
"""
import logging
from pathlib import Path
from typing import Any, List, Optional, Sequence, Tuple, Union

import numpy as np
import yaml
from pydantic import ValidationError

from gradnav.models.scene import Gaussian, Scene, Vec3
from gradnav.schemas.scene import SceneSchema

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

GATE_X = 4.0
GATE_HEIGHT = 1.3
GATE_HALF_WIDTH = 0.45
GATE_HALF_HEIGHT = 0.5
GATE_TOP = 2.2
FLIGHT_HEIGHT = 1.3
SCENE_BOUNDS: Tuple[Vec3, Vec3] = ((-1.0, -3.0, 0.0), (10.0, 3.0, 3.0))
MAX_GATE_OFFSET = 2.0


class SceneFormatError(ValueError):
    """Raised for malformed scene files; the message names the line and field."""


def _field_path(loc: Sequence[Any]) -> str:
    path = ""
    for part in loc:
        if isinstance(part, int):
            path += f"[{part}]"
        else:
            path += f".{part}" if path else str(part)
    return path or "<document>"


def _line_of(node: Optional[yaml.Node], loc: Sequence[Any]) -> Optional[int]:
    """1-based line of the deepest YAML node along ``loc``."""
    line = None
    for part in loc:
        if node is None:
            break
        line = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            node = next((value for key, value in node.value if key.value == part), None)
        elif isinstance(node, yaml.SequenceNode) and isinstance(part, int) and part < len(node.value):
            node = node.value[part]
        else:
            node = None
    if node is not None:
        line = node.start_mark.line + 1
    return line


def scene_from_schema(schema: SceneSchema) -> Scene:
    return Scene(
        gaussians=[
            Gaussian(
                mu=tuple(g.mu),
                scale=tuple(g.scale),
                rot=tuple(g.rot),
                color=tuple(g.color),
                alpha=float(g.alpha),
                obstacle=bool(g.obstacle),
            )
            for g in schema.gaussians
        ],
        background=tuple(schema.background),
        bounds=(tuple(schema.bounds.min), tuple(schema.bounds.max)),
        waypoints=[tuple(w) for w in schema.waypoints],
        reference_trajectory=[tuple(p) for p in schema.reference_trajectory],
        obstacle_points=None if schema.obstacle_points is None else [tuple(p) for p in schema.obstacle_points],
        gate_center=None if schema.gate_center is None else tuple(schema.gate_center),
        name=schema.name,
    )


def scene_to_dict(scene: Scene) -> dict:
    data = {
        "name": scene.name,
        "background": list(scene.background),
        "bounds": {"min": list(scene.bounds[0]), "max": list(scene.bounds[1])},
        "waypoints": [list(w) for w in scene.waypoints],
        "reference_trajectory": [list(p) for p in scene.reference_trajectory],
    }
    if scene.obstacle_points is not None:
        data["obstacle_points"] = [list(p) for p in scene.obstacle_points]
    if scene.gate_center is not None:
        data["gate_center"] = list(scene.gate_center)
    data["gaussians"] = [
        {
            "mu": list(g.mu),
            "scale": list(g.scale),
            "rot": list(g.rot),
            "color": list(g.color),
            "alpha": g.alpha,
            "obstacle": g.obstacle,
        }
        for g in scene.gaussians
    ]
    return data


def save_scene(scene: Scene, path: PathLike) -> Path:
    """Write a scene as a single YAML document."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8") as handle:
        yaml.safe_dump(scene_to_dict(scene), handle, sort_keys=False, default_flow_style=None, width=120)
    logger.info(f"Saved scene '{scene.name}' with {len(scene.gaussians)} Gaussians to {target}")
    return target


def load_scene(path: PathLike) -> Scene:
    """
    Read and validate a scene file.

    Raises:
        FileNotFoundError: if the file does not exist
        SceneFormatError: on YAML syntax errors or invalid fields, naming the
            line and the field path (e.g. ``gaussians[3].alpha``)
    """
    source = Path(path)
    if not source.is_file():
        raise FileNotFoundError(f"Scene file not found: {source}")
    text = source.read_text(encoding="utf-8")

    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        line = mark.line + 1 if mark is not None else "?"
        raise SceneFormatError(f"{source}: line {line}: {exc.problem}") from None

    if not isinstance(data, dict):
        raise SceneFormatError(f"{source}: line 1: expected a mapping at the top level")

    try:
        schema = SceneSchema.model_validate(data)
    except ValidationError as exc:
        problems = []
        for error in exc.errors():
            field = _field_path(error["loc"])
            line = _line_of(root, error["loc"])
            where = f"line {line}: " if line is not None else ""
            problems.append(f"{where}{field}: {error['msg']}")
        raise SceneFormatError(f"{source}: " + "; ".join(problems)) from None

    return scene_from_schema(schema)


# ------------------------------------------------------------ procedural scenes
def _blob(mu, scale, color, alpha, obstacle=False) -> Gaussian:
    return Gaussian(
        mu=tuple(float(c) for c in mu),
        scale=tuple(float(s) for s in scale),
        rot=(1.0, 0.0, 0.0, 0.0),
        color=tuple(float(c) for c in color),
        alpha=float(alpha),
        obstacle=obstacle,
    )


def _gate(gate_y: float) -> List[Gaussian]:
    """Rectangular frame around the opening plus two legs to the floor."""
    red = (0.85, 0.1, 0.1)
    size = (0.06, 0.06, 0.06)
    left, right = gate_y - GATE_HALF_WIDTH, gate_y + GATE_HALF_WIDTH
    bottom, top = GATE_HEIGHT - GATE_HALF_HEIGHT, GATE_HEIGHT + GATE_HALF_HEIGHT
    blobs = []
    for z in np.arange(0.0, GATE_TOP + 1e-9, 0.1):
        blobs.append(_blob((GATE_X, left, z), size, red, 0.95, obstacle=True))
        blobs.append(_blob((GATE_X, right, z), size, red, 0.95, obstacle=True))
    for y in np.arange(left + 0.1, right - 1e-9, 0.1):
        blobs.append(_blob((GATE_X, y, bottom), size, red, 0.95, obstacle=True))
        blobs.append(_blob((GATE_X, y, top), size, red, 0.95, obstacle=True))
    return blobs


def _room(rng: np.random.Generator) -> List[Gaussian]:
    (xmin, ymin, _), (xmax, ymax, zmax) = SCENE_BOUNDS
    blobs = []
    for x in np.arange(xmin + 0.5, xmax, 1.0):
        for z in (0.5, 1.5, 2.5):
            shade = 0.55 + 0.1 * rng.random()
            blobs.append(_blob((x, ymin, z), (0.5, 0.05, 0.5), (shade, shade, 0.6), 0.85))
            blobs.append(_blob((x, ymax, z), (0.5, 0.05, 0.5), (0.6, shade, shade), 0.85))
    for x in np.arange(xmin + 0.5, xmax, 1.0):
        for y in np.arange(ymin + 0.5, ymax, 1.0):
            tone = 0.25 if (int(np.floor(x)) + int(np.floor(y))) % 2 == 0 else 0.45
            blobs.append(_blob((x, y, 0.0), (0.5, 0.5, 0.02), (tone, tone, tone), 0.9))
    for y in np.arange(ymin + 0.5, ymax, 1.0):
        for z in (0.5, 1.5, 2.5):
            blobs.append(_blob((xmax, y, z), (0.05, 0.5, 0.5), (0.3, 0.4, 0.7), 0.9))
    return blobs


def _path_y(x: float, waypoints: Sequence[Vec3]) -> float:
    xs = [0.0] + [w[0] for w in waypoints]
    ys = [0.0] + [w[1] for w in waypoints]
    return float(np.interp(x, xs, ys))


def _distractors(rng: np.random.Generator, waypoints: Sequence[Vec3], count: int) -> List[Gaussian]:
    """Clutter kept at least 1 m from the flight corridor and away from the gate."""
    (xmin, ymin, _), (xmax, ymax, _) = SCENE_BOUNDS
    blobs = []
    attempts = 0
    while len(blobs) < count and attempts < 200 * count:
        attempts += 1
        x = rng.uniform(1.0, xmax - 1.0)
        y = rng.uniform(ymin + 0.4, ymax - 0.4)
        z = rng.uniform(0.3, 2.5)
        scale = rng.uniform(0.1, 0.25, size=3)
        color = rng.uniform(0.2, 1.0, size=3)
        if abs(x - GATE_X) < 0.8 or abs(y - _path_y(x, waypoints)) < 1.0:
            continue
        blobs.append(_blob((x, y, z), scale, color, 0.9, obstacle=True))
    return blobs


def make_gate_scene(gate_y: float = 0.0, distractor_seed: int = 0, distractors: int = 12) -> Scene:
    """
    Procedural corridor with one rectangular gate.

    The room spans x in [-1, 10], y in [-3, 3], z in [0, 3]. The gate stands at
    x = 4 with its opening centered at (4, gate_y, 1.3). Waypoints lead from
    the start area through the opening; the reference trajectory starts at
    (0, 0, 1.3) and ends at x = 9.

    Args:
        gate_y: lateral offset of the opening, m
        distractor_seed: seed of the clutter layout and wall shading
        distractors: number of clutter blobs

    Raises:
        ValueError: if the opening would leave the room
    """
    if abs(gate_y) > MAX_GATE_OFFSET:
        raise ValueError(f"gate_y must lie within [-{MAX_GATE_OFFSET}, {MAX_GATE_OFFSET}] m, got {gate_y}")
    rng = np.random.default_rng(distractor_seed)
    waypoints = [
        (2.0, gate_y / 2.0, FLIGHT_HEIGHT),
        (GATE_X, gate_y, FLIGHT_HEIGHT),
        (6.0, gate_y, FLIGHT_HEIGHT),
        (8.0, gate_y, FLIGHT_HEIGHT),
    ]
    reference = [(0.0, 0.0, FLIGHT_HEIGHT)] + waypoints + [(9.0, gate_y, FLIGHT_HEIGHT)]
    gaussians = _gate(gate_y) + _room(rng) + _distractors(rng, waypoints, distractors)
    scene = Scene(
        gaussians=gaussians,
        background=(0.7, 0.8, 0.95),
        bounds=SCENE_BOUNDS,
        waypoints=[tuple(float(c) for c in w) for w in waypoints],
        reference_trajectory=[tuple(float(c) for c in p) for p in reference],
        gate_center=(GATE_X, float(gate_y), GATE_HEIGHT),
        name=f"gate_y{gate_y:+.2f}_seed{distractor_seed}",
    )
    logger.info(f"Built gate scene '{scene.name}' with {len(gaussians)} Gaussians")
    return scene


def make_hover_scene() -> Scene:
    """Obstacle-free room used for hover training: walls and floor only."""
    rng = np.random.default_rng(0)
    return Scene(
        gaussians=_room(rng),
        background=(0.7, 0.8, 0.95),
        bounds=SCENE_BOUNDS,
        waypoints=[],
        reference_trajectory=[(0.0, 0.0, FLIGHT_HEIGHT), (1.0, 0.0, FLIGHT_HEIGHT)],
        name="hover",
    )


def curriculum_scenes(seed: int = 0) -> List[Scene]:
    """Left, middle and right gate scenes with non-overlapping openings."""
    return [make_gate_scene(gate_y, distractor_seed=seed + i) for i, gate_y in enumerate((-1.0, 0.0, 1.0))]
