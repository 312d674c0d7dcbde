"""
LIDAR <-> rectified camera transform and box conversion between the two frames.

KITTI labels are given in the rectified camera frame (x right, y down, z forward) with the
location at the bottom-face center and ``rotation_y`` about camera y. Boxes inside the toolkit
live in the LIDAR frame (x forward, y left, z up) with the geometric center.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Tuple

import numpy as np

from src.boxes.box import Box7
from src.core.errors import DataFormatError
from src.core.file_io import ensure_parent_dir

logger = logging.getLogger(__name__)

# camera x = -lidar y, camera y = -lidar z, camera z = lidar x
CANONICAL_ROTATION = np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])


@dataclass
class Calibration:
    """Rigid transform p_cam = rotation @ p_lidar + translation."""

    rotation: np.ndarray = field(default_factory=lambda: CANONICAL_ROTATION.copy())
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @classmethod
    def default(cls) -> "Calibration":
        return cls()

    def lidar_to_camera(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        return points @ self.rotation.T + self.translation

    def camera_to_lidar(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        return (points - self.translation) @ self.rotation

    def box_from_camera(self, h: float, w: float, l: float, x: float, y: float, z: float, ry: float) -> Box7:  # noqa: E741
        """LIDAR box from KITTI camera-frame fields."""
        bottom = self.camera_to_lidar(np.array([x, y, z]))[0]
        direction = np.array([math.cos(ry), 0.0, -math.sin(ry)]) @ self.rotation
        theta = math.atan2(direction[1], direction[0])
        return Box7(bottom[0], bottom[1], bottom[2] + h / 2.0, l, w, h, theta)

    def box_to_camera(self, box: Box7) -> Tuple[float, float, float, float, float, float, float]:
        """KITTI camera-frame fields (h, w, l, x, y, z, ry) of a LIDAR box."""
        bottom = self.lidar_to_camera(np.array([box.x, box.y, box.z - box.h / 2.0]))[0]
        direction = self.rotation @ np.array([math.cos(box.theta), math.sin(box.theta), 0.0])
        ry = math.atan2(-direction[2], direction[0])
        return box.h, box.w, box.l, float(bottom[0]), float(bottom[1]), float(bottom[2]), ry


def _parse_matrix(values: Dict[str, np.ndarray], key: str, shape: Tuple[int, int], path: Path) -> np.ndarray:
    if key not in values:
        raise DataFormatError(f"{path}: missing calibration entry '{key}'")
    matrix = values[key]
    if matrix.size != shape[0] * shape[1]:
        raise DataFormatError(f"{path}: '{key}' has {matrix.size} values, expected {shape[0] * shape[1]}")
    return matrix.reshape(shape)


def load_calibration(path: Path) -> Calibration:
    """
    Read ``R0_rect`` and ``Tr_velo_to_cam`` from a KITTI ``calib/*.txt`` file.

    Raises:
        FileNotFoundError: path missing
        DataFormatError: required entries absent or malformed
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Calibration file not found: {path}")

    values: Dict[str, np.ndarray] = {}
    for line_number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        key, sep, rest = line.partition(":")
        if not sep:
            raise DataFormatError(f"{path}:{line_number}: expected 'key: values'")
        try:
            values[key.strip()] = np.array([float(v) for v in rest.split()], dtype=np.float64)
        except ValueError as e:
            raise DataFormatError(f"{path}:{line_number}: {e}") from e

    r0 = _parse_matrix(values, "R0_rect", (3, 3), path)
    velo_to_cam = _parse_matrix(values, "Tr_velo_to_cam", (3, 4), path)
    return Calibration(rotation=r0 @ velo_to_cam[:, :3], translation=r0 @ velo_to_cam[:, 3])


def save_calibration(path: Path, calibration: Calibration) -> Path:
    """Write ``calibration`` as an identity ``R0_rect`` plus ``Tr_velo_to_cam``."""
    path = ensure_parent_dir(Path(path))
    velo_to_cam = np.hstack([calibration.rotation, calibration.translation.reshape(3, 1)])
    lines = [
        "R0_rect: " + " ".join(f"{v:.12e}" for v in np.eye(3).ravel()),
        "Tr_velo_to_cam: " + " ".join(f"{v:.12e}" for v in velo_to_cam.ravel()),
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
