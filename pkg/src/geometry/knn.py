"""k-nearest-neighbor graph over voxel centroids."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.core.errors import GeometryError


@dataclass
class KnnGraph:
    """``neighbors[i]`` holds the k nearest other nodes of node i by ascending distance."""

    k: int
    neighbors: np.ndarray
    distances: np.ndarray

    def __len__(self) -> int:
        return len(self.neighbors)


def pairwise_squared_distances(centroids: np.ndarray) -> np.ndarray:
    centroids = np.asarray(centroids, dtype=np.float64)
    diff = centroids[:, None, :] - centroids[None, :, :]
    return np.sum(diff * diff, axis=2)


def knn_brute_force(centroids: np.ndarray, k: int) -> np.ndarray:
    """Reference neighbor lists by a per-node sort over (distance, index)."""
    sq = pairwise_squared_distances(centroids)
    n_nodes = len(sq)
    rows = []
    for i in range(n_nodes):
        others = sorted((sq[i, j], j) for j in range(n_nodes) if j != i)
        rows.append([j for _, j in others[:k]])
    return np.array(rows, dtype=np.int64).reshape(n_nodes, k)


def build_knn_graph(centroids: np.ndarray, k: int) -> KnnGraph:
    """
    Exact k-NN by Euclidean distance; ties go to the lower index and self-loops are excluded.

    Raises:
        GeometryError: k < 1 or k >= number of nodes
    """
    centroids = np.asarray(centroids, dtype=np.float64)
    n_nodes = len(centroids)
    if k < 1 or k >= n_nodes:
        raise GeometryError(f"k must satisfy 1 <= k < N, got k={k} with N={n_nodes}")
    sq = pairwise_squared_distances(centroids)
    np.fill_diagonal(sq, np.inf)
    neighbors = np.argsort(sq, axis=1, kind="stable")[:, :k]
    distances = np.sqrt(np.take_along_axis(sq, neighbors, axis=1))
    return KnnGraph(k=k, neighbors=neighbors, distances=distances)
