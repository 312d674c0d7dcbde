"""Farthest point sampling, ball query, spherical voxels and the KNN graph."""

from src.geometry.knn import KnnGraph, build_knn_graph
from src.geometry.sampling import farthest_point_sample
from src.geometry.spatial_hash import SpatialHashGrid, ball_query
from src.geometry.voxels import SphericalVoxel, VoxelBatch, build_voxels, voxelize

__all__ = [
    "KnnGraph",
    "SpatialHashGrid",
    "SphericalVoxel",
    "VoxelBatch",
    "ball_query",
    "build_knn_graph",
    "build_voxels",
    "farthest_point_sample",
    "voxelize",
]
