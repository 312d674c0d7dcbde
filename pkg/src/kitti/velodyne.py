"""Velodyne point-cloud files: consecutive little-endian float32 (x, y, z, intensity) records."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from src.core.errors import DimensionError, RecordError, TruncatedFileError
from src.core.file_io import ensure_parent_dir

logger = logging.getLogger(__name__)

RECORD_DTYPE = np.dtype("<f4")
RECORD_BYTES = 4 * RECORD_DTYPE.itemsize


def load_velodyne(path: Path) -> np.ndarray:
    """
    Read a velodyne ``.bin`` file into an [n x 4] float64 array.

    Intensity is clamped to [0, 1].

    Raises:
        FileNotFoundError: path missing
        TruncatedFileError: length not a multiple of 16 bytes
        RecordError: a record holds NaN/Inf (first offending record index)
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Point cloud not found: {path}")
    raw = path.read_bytes()
    if len(raw) % RECORD_BYTES:
        raise TruncatedFileError(f"{path}: {len(raw)} bytes is not a multiple of {RECORD_BYTES}", len(raw))

    points = np.frombuffer(raw, dtype=RECORD_DTYPE).reshape(-1, 4).astype(np.float64)
    bad = np.flatnonzero(~np.all(np.isfinite(points), axis=1))
    if len(bad):
        raise RecordError(f"{path}: non-finite value", int(bad[0]))

    clamped = np.count_nonzero((points[:, 3] < 0.0) | (points[:, 3] > 1.0))
    if clamped:
        logger.debug(f"{path}: clamped {clamped} intensities into [0, 1]")
        points[:, 3] = np.clip(points[:, 3], 0.0, 1.0)
    return points


def save_velodyne(path: Path, points: np.ndarray) -> Path:
    """Write an [n x 4] array in the velodyne layout (values narrowed to float32)."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 4:
        raise DimensionError(f"expected an n x 4 point array, got shape {points.shape}")
    path = ensure_parent_dir(Path(path))
    path.write_bytes(np.ascontiguousarray(points, dtype=RECORD_DTYPE).tobytes())
    return path
