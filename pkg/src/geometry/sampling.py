"""Iterative farthest point sampling."""

from __future__ import annotations

import numpy as np

from src.core.errors import GeometryError


def farthest_point_sample(points: np.ndarray, n_samples: int, seed_index: int = 0) -> np.ndarray:
    """
    Greedy max-min subset of ``points``.

    The first pick is ``seed_index``; each later pick maximizes the squared distance to its
    nearest already-picked point, ties going to the lowest index.

    Args:
        points: [n x >=3] array; only x, y, z are used
        n_samples: number of picks N, 1 <= N <= n
        seed_index: first pick

    Returns:
        [N] point indices in visit order

    Raises:
        GeometryError: N out of range or seed index invalid
    """
    xyz = np.asarray(points, dtype=np.float64)[:, :3]
    n_points = len(xyz)
    if n_samples < 1 or n_samples > n_points:
        raise GeometryError(f"cannot sample {n_samples} of {n_points} points")
    if not 0 <= seed_index < n_points:
        raise GeometryError(f"seed index {seed_index} out of range for {n_points} points")

    picks = np.empty(n_samples, dtype=np.int64)
    nearest = np.full(n_points, np.inf)
    current = seed_index
    for i in range(n_samples):
        picks[i] = current
        nearest = np.minimum(nearest, np.sum((xyz - xyz[current]) ** 2, axis=1))
        nearest[picks[: i + 1]] = -1.0
        current = int(np.argmax(nearest))
    return picks
