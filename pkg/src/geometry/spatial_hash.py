"""
Uniform hash grid for fixed-radius neighbor queries.

With cell size equal to the query radius, every point closer than r to a query lies in the
query's cell or one of its 26 neighbors.
"""

from __future__ import annotations

import itertools
from typing import Dict, Optional, Tuple

import numpy as np

from src.core.errors import GeometryError

_NEIGHBOR_OFFSETS = np.array(list(itertools.product((-1, 0, 1), repeat=3)), dtype=np.int64)


def squared_distances(points: np.ndarray, center: np.ndarray) -> np.ndarray:
    return np.sum((points - center) ** 2, axis=1)


def ball_query_brute_force(points: np.ndarray, center_index: int, radius: float) -> np.ndarray:
    """Linear scan: ascending indices with distance strictly below ``radius``."""
    xyz = np.asarray(points, dtype=np.float64)[:, :3]
    return np.flatnonzero(squared_distances(xyz, xyz[center_index]) < radius * radius)


class SpatialHashGrid:
    """Points bucketed into cubic cells of edge ``cell_size``."""

    def __init__(self, points: np.ndarray, cell_size: float):
        if cell_size <= 0:
            raise GeometryError(f"cell size must be > 0, got {cell_size}")
        self.points = np.asarray(points, dtype=np.float64)[:, :3]
        self.cell_size = cell_size
        self.cells: Dict[Tuple[int, int, int], np.ndarray] = {}
        if not len(self.points):
            return
        coords = np.floor(self.points / cell_size).astype(np.int64)
        unique, inverse = np.unique(coords, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        order = np.argsort(inverse, kind="stable")
        bounds = np.searchsorted(inverse[order], np.arange(len(unique) + 1))
        for cell_index, key in enumerate(map(tuple, unique)):
            self.cells[key] = order[bounds[cell_index]: bounds[cell_index + 1]]

    def __len__(self) -> int:
        return len(self.points)

    def cell_of(self, point: np.ndarray) -> np.ndarray:
        return np.floor(np.asarray(point, dtype=np.float64)[:3] / self.cell_size).astype(np.int64)

    def query_radius(self, center: np.ndarray, radius: float) -> np.ndarray:
        """Ascending indices of points with distance strictly below ``radius`` (<= cell size)."""
        if radius > self.cell_size:
            raise GeometryError(f"query radius {radius} exceeds cell size {self.cell_size}")
        center = np.asarray(center, dtype=np.float64)[:3]
        base = self.cell_of(center)
        buckets = [self.cells.get(tuple(base + offset)) for offset in _NEIGHBOR_OFFSETS]
        buckets = [bucket for bucket in buckets if bucket is not None]
        if not buckets:
            return np.zeros(0, dtype=np.int64)
        candidates = np.concatenate(buckets)
        inside = candidates[squared_distances(self.points[candidates], center) < radius * radius]
        return np.sort(inside)


def ball_query(points: np.ndarray, center_index: int, radius: float, grid: Optional[SpatialHashGrid] = None) -> np.ndarray:
    """
    Members of the spherical neighborhood of ``points[center_index]``, center included.

    Raises:
        GeometryError: non-positive radius
    """
    if radius <= 0:
        raise GeometryError(f"radius must be > 0, got {radius}")
    grid = grid if grid is not None else SpatialHashGrid(points, radius)
    return grid.query_radius(grid.points[center_index], radius)
