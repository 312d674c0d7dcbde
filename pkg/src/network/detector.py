"""
Assembled detector: voxelization, voxel-graph features, BEV scatter, sparse-to-dense head and
anchor-aligned outputs, plus decoding and NMS for inference.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.boxes.anchors import AnchorGrid, generate_anchors, nms_thresholds_for
from src.boxes.box import Box7
from src.boxes.codec import BoxCodec
from src.boxes.nms import nms_per_class
from src.core.config import TrainConfig
from src.geometry.knn import KnnGraph, build_knn_graph
from src.geometry.voxels import VoxelBatch, voxelize
from src.kitti.types import Detection, ObjectClass
from src.network.sdr_head import BOX_CODE_SIZE, HeadOutput, SdrHead
from src.network.voxel_graph import CENTROID_FEATURES, POINT_FEATURES, VoxelGraphNet
from src.tensor import functional as F
from src.tensor.layers import Module
from src.tensor.tensor import Tensor, no_grad

logger = logging.getLogger(__name__)


@dataclass
class PreparedScene:
    """Gradient-free pre-processing of one point cloud."""

    scene_id: str
    voxels: VoxelBatch
    graph: Optional[KnnGraph]


def prepare_points(points: np.ndarray, config: TrainConfig, scene_id: str = "") -> PreparedScene:
    """Voxelize a cloud and build the KNN graph over voxel centroids."""
    voxels = voxelize(
        points,
        config.num_voxels,
        config.radius,
        config.max_points_per_voxel,
        config.fps_seed_index,
        config.relative_coords,
    )
    graph = None
    if config.global_attention:
        k = min(config.knn_k, len(voxels) - 1)
        if k < config.knn_k:
            logger.warning(f"Scene {scene_id}: {len(voxels)} voxels, KNN k reduced to {k}")
        graph = build_knn_graph(voxels.centroids, k) if k >= 1 else None
    return PreparedScene(scene_id=scene_id, voxels=voxels, graph=graph)


class SVGANet(Module):
    """End-to-end detector for one class group."""

    def __init__(self, config: TrainConfig, rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        self.config = config
        self.voxel_net = VoxelGraphNet.from_config(config, rng)
        height, width = config.grid_shape
        self.anchors: AnchorGrid = generate_anchors(
            config.extent, (height // 2, width // 2), config.classes, config.anchor_headings
        )
        self.head = SdrHead(
            config.bev_channels,
            self.anchors.anchors_per_cell,
            rng,
            block_channels=config.block_channels,
            convs_per_block=config.convs_per_block,
            branch_channels=config.branch_channels,
            branch_convs=config.branch_convs,
            fused_channels=config.fused_channels,
            variant=config.head_variant,
        )
        self.codec = BoxCodec()

    def prepare(self, points: np.ndarray, scene_id: str = "") -> PreparedScene:
        return prepare_points(points, self.config, scene_id)

    def bev_features(self, prepared: PreparedScene) -> Tensor:
        pooled = self.voxel_net(prepared.voxels, prepared.graph)
        return self.voxel_net.to_bev(
            pooled, prepared.voxels.centroids, self.config.extent, self.config.grid_resolution
        )

    def forward(self, scenes: Sequence[PreparedScene]) -> Tuple[Tensor, Tensor]:
        """
        Anchor-aligned outputs for a batch of prepared scenes.

        Returns:
            (logits [B x M], residuals [B x M x 7]) with M = number of anchors
        """
        grids = [self.bev_features(scene) for scene in scenes]
        stacked = F.concat([grid.reshape((1,) + grid.shape) for grid in grids], axis=0)
        output: HeadOutput = self.head(stacked)
        return output.flatten()

    def predict(self, points: np.ndarray, scene_id: str = "") -> List[Detection]:
        """
        Scored detections for one point cloud: sigmoid scores above ``score_threshold``, the
        ``pre_nms_top_k`` best decoded and suppressed per class, at most ``max_detections`` kept.
        """
        return self.predict_prepared(self.prepare(points, scene_id))

    def predict_prepared(self, prepared: PreparedScene) -> List[Detection]:
        was_training = self.training
        self.eval()
        try:
            with no_grad():
                logits, residuals = self.forward([prepared])
        finally:
            self.train(was_training)
        return self.postprocess(logits.data[0], residuals.data[0])

    def postprocess(self, logits: np.ndarray, residuals: np.ndarray) -> List[Detection]:
        config = self.config
        scores = F.stable_sigmoid(np.asarray(logits, dtype=np.float64))
        candidates = np.flatnonzero(scores >= config.score_threshold)
        if not len(candidates):
            return []
        order = np.lexsort((candidates, -scores[candidates]))
        candidates = candidates[order[: config.pre_nms_top_k]]

        boxes, _ = self.codec.decode_array(residuals[candidates], self.anchors.boxes[candidates])
        class_ids = self.anchors.class_ids[candidates]
        thresholds = nms_thresholds_for(self.anchors.classes, config.nms_iou_thresh, config.per_class_thresholds)
        kept = nms_per_class(boxes, scores[candidates], class_ids, thresholds, config.nms_iou_kind)
        kept = kept[: config.max_detections]

        return [
            Detection(
                box=Box7.from_array(boxes[i]),
                object_class=ObjectClass(self.anchors.classes[class_ids[i]]),
                score=float(scores[candidates[i]]),
            )
            for i in kept
        ]


def _linear_count(in_features: int, out_features: int) -> int:
    return in_features * out_features + out_features


def _chain_count(in_features: int, sizes: Sequence[int]) -> int:
    total = 0
    for size in sizes:
        total += _linear_count(in_features, size)
        in_features = size
    return total


def _conv_count(in_channels: int, out_channels: int, kernel: int, bias: bool = True) -> int:
    return out_channels * in_channels * kernel * kernel + (out_channels if bias else 0)


def _conv_bn_relu_count(in_channels: int, out_channels: int) -> int:
    return _conv_count(in_channels, out_channels, 3) + 2 * out_channels


def count_voxel_graph_parameters(config: TrainConfig) -> int:
    """Closed-form parameter count of the voxel-graph network and BEV projection."""
    total = _chain_count(POINT_FEATURES, config.point_mlp_sizes)
    width = config.point_mlp_sizes[-1]
    global_width = config.global_mlp_sizes[-1]
    if config.global_attention:
        total += _chain_count(CENTROID_FEATURES, config.global_mlp_sizes)
    layer_sizes = config.attention_layer_sizes()
    for index, (hidden, out) in enumerate(layer_sizes):
        total += _linear_count(width, hidden) + _linear_count(hidden, out)
        if config.global_attention:
            total += _linear_count(global_width, 1)
            if index < len(layer_sizes) - 1:
                total += _linear_count(global_width, hidden) + _linear_count(hidden, out)
        width = global_width = out
    return total + _linear_count(width, config.bev_channels)


def count_head_parameters(config: TrainConfig) -> int:
    """Closed-form parameter count of the sparse-to-dense head for ``config``."""
    n_anchors = len(config.classes) * len(config.anchor_headings)
    c1, c2, c3 = config.block_channels
    branch = config.branch_channels
    total = 0
    previous = config.bev_channels
    for channels in config.block_channels:
        total += _conv_bn_relu_count(previous, channels)
        total += (config.convs_per_block - 1) * _conv_bn_relu_count(channels, channels)
        previous = channels
    branch_inputs = (c1, c2, c3) if config.head_variant == "sr" else (c1 + c2, c2 + c3, c3)
    for width in branch_inputs:
        total += _conv_bn_relu_count(width, branch) + (config.branch_convs - 1) * _conv_bn_relu_count(branch, branch)
    if config.head_variant != "dr":
        total += sum(_conv_count(channels, branch, 1, bias=False) for channels in config.block_channels)
    total += _conv_bn_relu_count(3 * branch, config.fused_channels)
    total += _conv_count(config.fused_channels, n_anchors, 1)
    total += _conv_count(config.fused_channels, BOX_CODE_SIZE * n_anchors, 1)
    return total


def count_parameters(config: TrainConfig) -> int:
    return count_voxel_graph_parameters(config) + count_head_parameters(config)
