"""Voxel-graph feature network, sparse-to-dense head and the assembled detector."""

from src.network.detector import PreparedScene, SVGANet, count_parameters, prepare_points
from src.network.sdr_head import HeadOutput, SdrHead
from src.network.voxel_graph import VoxelGraphNet, scatter_to_bev

__all__ = [
    "HeadOutput",
    "PreparedScene",
    "SVGANet",
    "SdrHead",
    "VoxelGraphNet",
    "count_parameters",
    "prepare_points",
    "scatter_to_bev",
]
