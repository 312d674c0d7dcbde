"""
Voxel-graph feature extractor.

Per voxel, a point-wise MLP lifts member rows to features; stacked attention layers then mix
the members of each voxel as a complete graph, each layer scaled by a gate derived from the
KNN graph over voxel centroids. A masked max over members pools every voxel to one vector, and
a linear projection scatters those vectors onto the bird's-eye-view grid.
"""

from __future__ import annotations

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.core.config import TrainConfig
from src.core.errors import ConfigurationError, DimensionError
from src.geometry.knn import KnnGraph
from src.geometry.voxels import VoxelBatch
from src.tensor import functional as F
from src.tensor.layers import MLP, Linear, Module, mlp_forward
from src.tensor.tensor import Tensor

logger = logging.getLogger(__name__)

POINT_FEATURES = 4
CENTROID_FEATURES = 3


def pair_mask(mask: np.ndarray) -> np.ndarray:
    """[N x T x T] True where both members are real and distinct."""
    mask = np.asarray(mask, dtype=bool)
    width = mask.shape[-1]
    return mask[..., :, None] & mask[..., None, :] & ~np.eye(width, dtype=bool)


def local_attention_scores(features: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
    """
    Softmax over raw dot products with the other members of the same voxel.

    Accepts one voxel [t x d] or a padded batch [N x T x d]. Rows of single-member voxels and of
    padding are all zero.
    """
    single = features.ndim == 2
    if single:
        features = features.reshape((1,) + features.shape)
    if mask is None:
        mask = np.ones(features.shape[:2], dtype=bool)
    scores = features @ features.transpose(0, 2, 1)
    alpha = F.masked_softmax(scores, pair_mask(mask), axis=-1)
    return alpha.reshape(alpha.shape[1:]) if single else alpha


def neighbor_weights(
    global_features: Tensor, graph: KnnGraph, epsilon: float = 1e-8
) -> Tuple[Tensor, Tensor, int]:
    """
    Normalized dot-product weights of each node's KNN neighbors.

    w_il = f_i . f_il / sum_l f_i . f_il; nodes whose denominator magnitude is below ``epsilon``
    fall back to uniform 1/k.

    Returns:
        (weights [N x k], neighbor rows [N x k x d], number of guarded nodes)
    """
    neighbors = global_features[graph.neighbors]
    dots = (global_features.reshape(global_features.shape[0], 1, -1) * neighbors).sum(axis=2)
    denom = dots.sum(axis=1, keepdims=True)
    guard = (np.abs(denom.data) < epsilon).astype(np.float64)
    weights = dots / (denom + guard) * (1.0 - guard) + guard / graph.k
    return weights, neighbors, int(guard.sum())


class AttentionLayer(Module):
    """
    One stacked layer: gated local aggregation f'_j = beta * f_j + sum_k alpha_jk f_k followed by a
    2-layer ReLU MLP, plus the gate and (when not last) the global-feature update.
    """

    def __init__(
        self,
        in_features: int,
        global_features: int,
        sizes: Tuple[int, int],
        rng: np.random.Generator,
        use_global: bool = True,
        update_global: bool = True,
        gate_mode: str = "voxel",
        epsilon: float = 1e-8,
    ):
        super().__init__()
        hidden, out = sizes
        self.local_layers = [Linear(in_features, hidden, rng), Linear(hidden, out, rng)]
        self.use_global = use_global
        self.gate_mode = gate_mode
        self.epsilon = epsilon
        self.gate = Linear(global_features, 1, rng) if use_global else None
        self.global_layers = (
            [Linear(global_features, hidden, rng), Linear(hidden, out, rng)] if use_global and update_global else []
        )
        self.guard_count = 0

    @property
    def out_features(self) -> int:
        return self.local_layers[-1].out_features

    def global_gate(self, global_features: Tensor, graph: KnnGraph) -> Tuple[Tensor, Tensor]:
        """
        Returns:
            (beta [N], aggregated neighbor features g [N x d_g])
        """
        weights, neighbors, guarded = neighbor_weights(global_features, graph, self.epsilon)
        if guarded:
            self.guard_count += guarded
            logger.warning(f"{guarded} voxels fell back to uniform neighbor weights")
        aggregated = (weights.reshape(weights.shape + (1,)) * neighbors).sum(axis=1)
        pooled = aggregated.mean(axis=0, keepdims=True) if self.gate_mode == "layer" else aggregated
        beta = F.sigmoid(self.gate(pooled)).reshape(-1)
        if self.gate_mode == "layer":
            beta = beta * np.ones(global_features.shape[0])
        return beta, aggregated

    def local(self, features: Tensor, beta: Tensor, mask: np.ndarray) -> Tensor:
        alpha = local_attention_scores(features, mask)
        pre = beta.reshape(-1, 1, 1) * features + alpha @ features
        out = mlp_forward(pre, self.local_layers)
        return out * mask[..., None].astype(np.float64)

    def forward(
        self, features: Tensor, global_features: Optional[Tensor], graph: Optional[KnnGraph], mask: np.ndarray
    ) -> Tuple[Tensor, Optional[Tensor]]:
        if self.use_global:
            beta, aggregated = self.global_gate(global_features, graph)
        else:
            beta, aggregated = Tensor(np.ones(features.shape[0])), None
        out = self.local(features, beta, mask)
        next_global = mlp_forward(aggregated, self.global_layers) if self.global_layers else None
        return out, next_global


def scatter_to_bev(
    features: Tensor,
    centroids: np.ndarray,
    extent: Tuple[float, float, float, float],
    resolution: float,
) -> Tuple[Tensor, int]:
    """
    Write each voxel's features at the BEV cell holding its centroid; collisions take the
    element-wise max and empty cells are zero.

    Returns:
        (grid [C x H x W], number of voxels outside the extent)
    """
    x_min, x_max, y_min, y_max = extent
    if resolution <= 0 or x_max <= x_min or y_max <= y_min:
        raise ConfigurationError(f"BEV grid has zero area: extent={extent} resolution={resolution}")
    height = int(np.ceil((y_max - y_min) / resolution - 1e-9))
    width = int(np.ceil((x_max - x_min) / resolution - 1e-9))
    centroids = np.asarray(centroids, dtype=np.float64).reshape(-1, 3)
    cols = np.floor((centroids[:, 0] - x_min) / resolution).astype(np.int64)
    rows = np.floor((centroids[:, 1] - y_min) / resolution).astype(np.int64)
    inside = (cols >= 0) & (cols < width) & (rows >= 0) & (rows < height)
    dropped = int(np.count_nonzero(~inside))
    if dropped:
        logger.debug(f"{dropped} voxels outside the BEV extent dropped")

    channels = features.shape[1]
    kept = np.flatnonzero(inside)
    grid = F.scatter_max(features[kept], rows[kept] * width + cols[kept], height * width)
    return grid.transpose(1, 0).reshape(channels, height, width), dropped


class VoxelGraphNet(Module):
    """Point-wise MLP, stacked gated attention layers, per-voxel max pooling and BEV projection."""

    def __init__(
        self,
        rng: np.random.Generator,
        point_mlp_sizes: Sequence[int] = (64, 128, 128),
        global_mlp_sizes: Sequence[int] = (64, 128, 128),
        layer_sizes: Sequence[Tuple[int, int]] = ((128, 128), (128, 256), (512, 1024)),
        bev_channels: int = 64,
        use_global: bool = True,
        gate_mode: str = "voxel",
        epsilon: float = 1e-8,
    ):
        super().__init__()
        if not layer_sizes:
            raise ConfigurationError("at least one attention layer is required")
        self.point_mlp = MLP(POINT_FEATURES, point_mlp_sizes, rng)
        self.global_mlp = MLP(CENTROID_FEATURES, global_mlp_sizes, rng) if use_global else None
        self.use_global = use_global

        layers: List[AttentionLayer] = []
        width = self.point_mlp.out_features
        global_width = self.global_mlp.out_features if use_global else 0
        for index, sizes in enumerate(layer_sizes):
            is_last = index == len(layer_sizes) - 1
            layers.append(
                AttentionLayer(width, global_width, sizes, rng, use_global, not is_last, gate_mode, epsilon)
            )
            width = sizes[1]
            global_width = sizes[1]
        self.layers = layers
        self.bev_projection = Linear(width, bev_channels, rng)
        self.dropped_voxels = 0

    @classmethod
    def from_config(cls, config: TrainConfig, rng: np.random.Generator) -> "VoxelGraphNet":
        return cls(
            rng,
            point_mlp_sizes=config.point_mlp_sizes,
            global_mlp_sizes=config.global_mlp_sizes,
            layer_sizes=config.attention_layer_sizes(),
            bev_channels=config.bev_channels,
            use_global=config.global_attention,
            gate_mode=config.gate_mode,
            epsilon=config.attention_epsilon,
        )

    @property
    def out_features(self) -> int:
        return self.layers[-1].out_features

    def pointwise(self, features: np.ndarray, mask: np.ndarray) -> Tensor:
        """Point-wise MLP over [N x T x 4] rows; padding rows are zeroed."""
        features = np.asarray(features, dtype=np.float64)
        if features.shape[-1] != POINT_FEATURES:
            raise DimensionError(f"expected {POINT_FEATURES} features per point, got {features.shape[-1]}")
        return self.point_mlp(Tensor(features)) * mask[..., None].astype(np.float64)

    def forward(self, batch: VoxelBatch, graph: Optional[KnnGraph]) -> Tensor:
        """
        Pooled per-voxel features [N x d_final].

        Raises:
            ConfigurationError: global attention enabled but no KNN graph given
        """
        if self.use_global and graph is None:
            raise ConfigurationError("global attention needs a KNN graph over voxel centroids")
        mask = batch.mask
        features = self.pointwise(batch.features, mask)
        global_features = self.global_mlp(Tensor(batch.centroids)) if self.use_global else None
        for layer in self.layers:
            features, next_global = layer(features, global_features, graph, mask)
            if next_global is not None:
                global_features = next_global
        return F.masked_max(features, mask[..., None], axis=1)

    def to_bev(
        self, pooled: Tensor, centroids: np.ndarray, extent: Tuple[float, float, float, float], resolution: float
    ) -> Tensor:
        grid, dropped = scatter_to_bev(self.bev_projection(pooled), centroids, extent, resolution)
        if dropped:
            self.dropped_voxels += dropped
        return grid
