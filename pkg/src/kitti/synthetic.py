"""
Synthetic desk-scale scenes: non-overlapping cuboid objects sampled on their surfaces over a
flat ground plane with uniform clutter. A scene is a pure function of its config and seed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from src.boxes.anchors import ANCHOR_SIZES
from src.boxes.box import Box7
from src.core.errors import ConfigurationError
from src.core.file_io import write_id_list
from src.kitti.calibration import Calibration, save_calibration
from src.kitti.labels import save_labels
from src.kitti.types import LabeledBox, ObjectClass, Scene
from src.kitti.velodyne import save_velodyne

logger = logging.getLogger(__name__)

GROUND_Z = -1.78


@dataclass
class SyntheticConfig:
    """Object counts, placement ranges and sampling noise for ``generate_synthetic``."""

    n_boxes: int = 3
    n_clutter: int = 400
    noise: float = 0.02
    points_per_box: int = 200
    classes: Tuple[str, ...] = ("Car",)
    headings: Tuple[float, ...] = (0.0, math.pi / 2)
    x_range: Tuple[float, float] = (4.0, 28.0)
    y_range: Tuple[float, float] = (-12.0, 12.0)
    size_jitter: float = 0.05
    ground_z: float = GROUND_Z
    require_boxes: bool = True
    max_placement_attempts: int = 1000


def _place_boxes(config: SyntheticConfig, rng: np.random.Generator) -> List[Tuple[str, Box7]]:
    placed: List[Tuple[str, Box7]] = []
    attempts = 0
    while len(placed) < config.n_boxes:
        attempts += 1
        if attempts > config.max_placement_attempts:
            raise ConfigurationError(
                f"could not place {config.n_boxes} non-overlapping boxes in x={config.x_range} y={config.y_range}"
            )
        name = config.classes[int(rng.integers(len(config.classes)))]
        size = ANCHOR_SIZES[name]
        scale = rng.uniform(1.0 - config.size_jitter, 1.0 + config.size_jitter, size=3)
        length, width, height = size.length * scale[0], size.width * scale[1], size.height * scale[2]
        heading = float(config.headings[int(rng.integers(len(config.headings)))])
        x = rng.uniform(*config.x_range)
        y = rng.uniform(*config.y_range)
        radius = 0.5 * math.hypot(length, width)
        # Circumscribed circles kept apart, so footprints never intersect.
        if any(math.hypot(x - other.x, y - other.y) <= radius + 0.5 * math.hypot(other.l, other.w) for _, other in placed):
            continue
        placed.append((name, Box7(x, y, config.ground_z + height / 2.0, length, width, height, heading)))
    return placed


def sample_box_surface(box: Box7, n_points: int, rng: np.random.Generator) -> np.ndarray:
    """Points [n x 3] uniformly distributed over the four sides and the top of ``box``."""
    half = np.array([box.l, box.w, box.h]) / 2.0
    # (fixed axis, sign) for +x, -x, +y, -y, +z faces
    faces = [(0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0), (2, 1.0)]
    areas = np.array([4.0 * np.prod(np.delete(half, axis)) for axis, _ in faces])
    face_ids = rng.choice(len(faces), size=n_points, p=areas / areas.sum())
    local = rng.uniform(-1.0, 1.0, size=(n_points, 3)) * half
    for index, (axis, sign) in enumerate(faces):
        local[face_ids == index, axis] = sign * half[axis]
    cos_t, sin_t = math.cos(box.theta), math.sin(box.theta)
    world = np.empty_like(local)
    world[:, 0] = box.x + local[:, 0] * cos_t - local[:, 1] * sin_t
    world[:, 1] = box.y + local[:, 0] * sin_t + local[:, 1] * cos_t
    world[:, 2] = box.z + local[:, 2]
    return world


def generate_synthetic(config: SyntheticConfig, seed: int, scene_id: str = "000000") -> Scene:
    """
    Generate one labeled scene.

    Raises:
        ConfigurationError: ``n_boxes`` is 0 while ``require_boxes`` is set, or boxes do not fit
    """
    if config.n_boxes < 0 or config.n_clutter < 0 or config.noise < 0:
        raise ConfigurationError("synthetic counts and noise must be non-negative")
    if config.n_boxes == 0 and config.require_boxes:
        raise ConfigurationError("training scenes need at least one box")
    unknown = [name for name in config.classes if name not in ANCHOR_SIZES]
    if unknown:
        raise ConfigurationError(f"No synthetic size for classes {unknown}")

    rng = np.random.default_rng(seed)
    placed = _place_boxes(config, rng)

    chunks = []
    labels = []
    for name, box in placed:
        surface = sample_box_surface(box, config.points_per_box, rng)
        surface += rng.normal(0.0, config.noise, size=surface.shape)
        intensity = rng.uniform(0.3, 1.0, size=(len(surface), 1))
        chunks.append(np.hstack([surface, intensity]))
        labels.append(LabeledBox(box=box, object_class=ObjectClass(name)))

    if config.n_clutter:
        ground = np.column_stack(
            [
                rng.uniform(*config.x_range, size=config.n_clutter),
                rng.uniform(*config.y_range, size=config.n_clutter),
                config.ground_z + rng.normal(0.0, config.noise, size=config.n_clutter),
                rng.uniform(0.0, 0.3, size=config.n_clutter),
            ]
        )
        chunks.append(ground)

    points = np.vstack(chunks) if chunks else np.zeros((0, 4))
    return Scene(scene_id=scene_id, points=points, labels=labels)


def write_synthetic_dataset(
    root: Path,
    n_scenes: int,
    config: SyntheticConfig,
    seed: int = 0,
    split_name: str = "train",
    calibration: Optional[Calibration] = None,
) -> Path:
    """
    Materialize ``n_scenes`` synthetic scenes in the KITTI directory layout.

    Writes ``velodyne/``, ``label_2/``, ``calib/`` and ``<split_name>.txt`` under ``root``;
    scene ``i`` is generated from seed ``seed + i``.

    Returns:
        Path of the split file
    """
    root = Path(root)
    calibration = calibration or Calibration.default()
    ids = []
    for index in range(n_scenes):
        scene_id = f"{index:06d}"
        scene = generate_synthetic(config, seed + index, scene_id)
        save_velodyne(root / "velodyne" / f"{scene_id}.bin", scene.points)
        save_labels(root / "label_2" / f"{scene_id}.txt", scene.labels, calibration)
        save_calibration(root / "calib" / f"{scene_id}.txt", calibration)
        ids.append(scene_id)
    split_path = write_id_list(root / f"{split_name}.txt", ids)
    logger.info(f"Wrote {n_scenes} synthetic scenes to {root}")
    return split_path
