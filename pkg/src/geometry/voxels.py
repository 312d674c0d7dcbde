"""
Spherical voxels: FPS seeds, ball-query membership with a per-voxel point cap, and the padded
batch layout consumed by the voxel-graph network.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from src.core.errors import GeometryError
from src.geometry.sampling import farthest_point_sample
from src.geometry.spatial_hash import SpatialHashGrid

logger = logging.getLogger(__name__)


@dataclass
class SphericalVoxel:
    """Seed point index, ascending member indices (seed included) and member centroid."""

    center_point_index: int
    member_indices: np.ndarray
    centroid: np.ndarray

    def __len__(self) -> int:
        return len(self.member_indices)


def cap_members(members: np.ndarray, seed_index: int, max_points: int) -> np.ndarray:
    """
    Deterministic stride subsample down to ``max_points`` members, always keeping the seed.

    Returns:
        ascending member indices
    """
    if len(members) <= max_points:
        return members
    others = members[members != seed_index]
    keep = max_points - 1
    picked = others[(np.arange(keep) * len(others)) // keep] if keep > 0 else others[:0]
    return np.sort(np.append(picked, seed_index))


def build_voxels(
    points: np.ndarray, n_voxels: int, radius: float, max_points: int = 64, seed_index: int = 0
) -> List[SphericalVoxel]:
    """
    One spherical voxel per FPS pick, members strictly within ``radius`` of the seed.

    Spheres may overlap; points outside every sphere are dropped.

    Raises:
        GeometryError: too few points, non-positive radius or cap
    """
    if radius <= 0:
        raise GeometryError(f"radius must be > 0, got {radius}")
    if max_points < 1:
        raise GeometryError(f"max points per voxel must be >= 1, got {max_points}")
    xyz = np.asarray(points, dtype=np.float64)[:, :3]
    seeds = farthest_point_sample(xyz, n_voxels, seed_index)
    grid = SpatialHashGrid(xyz, radius)

    voxels = []
    n_capped = 0
    for seed in seeds:
        members = grid.query_radius(xyz[seed], radius)
        capped = cap_members(members, int(seed), max_points)
        n_capped += len(capped) < len(members)
        voxels.append(SphericalVoxel(int(seed), capped, xyz[capped].mean(axis=0)))
    if n_capped:
        logger.debug(f"{n_capped} of {len(voxels)} voxels subsampled to {max_points} points")
    return voxels


@dataclass
class VoxelBatch:
    """
    Padded per-voxel point features.

    Attributes:
        features: [N x T x 4] rows (x, y, z, intensity); xyz relative to the seed in relative mode
        mask: [N x T] True for real members
        centroids: [N x 3] member means
        seeds: [N x 3] seed coordinates
    """

    features: np.ndarray
    mask: np.ndarray
    centroids: np.ndarray
    seeds: np.ndarray

    def __len__(self) -> int:
        return len(self.features)

    @property
    def counts(self) -> np.ndarray:
        return self.mask.sum(axis=1)


def batch_voxels(points: np.ndarray, voxels: List[SphericalVoxel], relative: bool = True) -> VoxelBatch:
    """Stack voxels into a padded batch; T is the largest member count."""
    points = np.asarray(points, dtype=np.float64)
    n_voxels = len(voxels)
    width = max((len(voxel) for voxel in voxels), default=1)
    features = np.zeros((n_voxels, width, 4))
    mask = np.zeros((n_voxels, width), dtype=bool)
    seeds = np.zeros((n_voxels, 3))
    centroids = np.zeros((n_voxels, 3))
    for i, voxel in enumerate(voxels):
        rows = points[voxel.member_indices, :4].copy()
        seeds[i] = points[voxel.center_point_index, :3]
        if relative:
            rows[:, :3] -= seeds[i]
        features[i, : len(rows)] = rows
        mask[i, : len(rows)] = True
        centroids[i] = voxel.centroid
    return VoxelBatch(features=features, mask=mask, centroids=centroids, seeds=seeds)


def voxelize(
    points: np.ndarray,
    n_voxels: int,
    radius: float,
    max_points: int = 64,
    seed_index: int = 0,
    relative: bool = True,
) -> VoxelBatch:
    """``build_voxels`` followed by ``batch_voxels``; clouds with fewer than N points use all of them as seeds."""
    n_points = len(points)
    if n_points == 0:
        raise GeometryError("cannot voxelize an empty point cloud")
    if n_points < n_voxels:
        logger.warning(f"Only {n_points} points for {n_voxels} voxels; using {n_points} voxels")
        n_voxels = n_points
    voxels = build_voxels(points, n_voxels, radius, max_points, seed_index)
    return batch_voxels(points, voxels, relative)
