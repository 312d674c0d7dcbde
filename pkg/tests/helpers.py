"""Shared numeric helpers for the test suite: finite-difference checks and micro configurations."""

import dataclasses
import math
from typing import Callable, Dict, Optional

import numpy as np

from src.core.config import TrainConfig
from src.kitti.synthetic import SyntheticConfig
from src.tensor.layers import Module
from src.tensor.tensor import Tensor, no_grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-12) -> float:
    """||a - n|| / max(||a|| + ||n||, floor)"""
    diff = np.linalg.norm(np.ravel(analytic) - np.ravel(numeric))
    scale = np.linalg.norm(np.ravel(analytic)) + np.linalg.norm(np.ravel(numeric))
    return float(diff / max(scale, floor))


def numeric_gradient(
    loss_fn: Callable[[], Tensor], array: np.ndarray, eps: float = 1e-6, indices: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    Central differences of ``loss_fn()`` with respect to ``array`` (perturbed in place).

    Only the flat ``indices`` are evaluated when given; the other entries stay 0.
    """
    grad = np.zeros(array.size)
    flat = array.reshape(-1)
    positions = range(array.size) if indices is None else indices
    for i in positions:
        original = flat[i]
        with no_grad():
            flat[i] = original + eps
            plus = loss_fn().item()
            flat[i] = original - eps
            minus = loss_fn().item()
        flat[i] = original
        grad[i] = (plus - minus) / (2.0 * eps)
    return grad.reshape(array.shape)


def check_gradients(
    loss_fn: Callable[[], Tensor],
    tensors: Dict[str, Tensor],
    eps: float = 1e-6,
    max_entries: Optional[int] = None,
    seed: int = 0,
    floor: float = 1e-12,
) -> Dict[str, float]:
    """
    Compare taped gradients with central differences.

    Returns:
        name -> relative error over the checked entries
    """
    for tensor in tensors.values():
        tensor.zero_grad()
    loss_fn().backward()
    rng = np.random.default_rng(seed)
    errors = {}
    for name, tensor in tensors.items():
        analytic = tensor.grad if tensor.grad is not None else np.zeros(tensor.shape)
        indices = None
        if max_entries is not None and tensor.size > max_entries:
            indices = rng.choice(tensor.size, size=max_entries, replace=False)
        numeric = numeric_gradient(loss_fn, tensor.data, eps, indices)
        if indices is not None:
            errors[name] = relative_error(analytic.reshape(-1)[indices], numeric.reshape(-1)[indices], floor)
        else:
            errors[name] = relative_error(analytic, numeric, floor)
    return errors


def randomize_parameters(model: Module, rng: np.random.Generator, scale: float = 0.5) -> None:
    """Overwrite every parameter with N(0, scale^2) draws so no ReLU input sits exactly on its kink."""
    for _, param in model.named_parameters():
        param.data[...] = rng.normal(0.0, scale, size=param.shape)


def micro_config(**overrides) -> TrainConfig:
    """Tiny network: 5 voxels of at most 4 points, width-4 layers, 8x8 BEV grid."""
    config = TrainConfig(
        num_voxels=5,
        radius=1.5,
        max_points_per_voxel=4,
        point_mlp_sizes=(4, 4),
        global_mlp_sizes=(4, 4),
        num_attention_layers=2,
        attention_mlp_sizes=(4, 4, 4, 4),
        knn_k=2,
        x_min=0.0,
        x_max=8.0,
        y_min=-4.0,
        y_max=4.0,
        grid_resolution=1.0,
        bev_channels=4,
        block_channels=(4, 4, 4),
        convs_per_block=1,
        branch_channels=4,
        branch_convs=1,
        fused_channels=4,
        batch_size=1,
        augment=False,
        num_workers=1,
    )
    return dataclasses.replace(config, **overrides)


def small_config(**overrides) -> TrainConfig:
    """Small trainable network on a 16x16 grid over a 16 m square, for loop and CLI tests."""
    config = micro_config(
        num_voxels=32,
        radius=1.8,
        max_points_per_voxel=8,
        point_mlp_sizes=(8, 8),
        global_mlp_sizes=(8, 8),
        attention_mlp_sizes=(8, 8, 8, 8),
        knn_k=3,
        x_min=0.0,
        x_max=16.0,
        y_min=-8.0,
        y_max=8.0,
        bev_channels=8,
        block_channels=(8, 8, 8),
        branch_channels=8,
        fused_channels=8,
        synthetic_scenes=2,
        synthetic_boxes=1,
        synthetic_clutter=60,
        epochs=1,
        batch_size=2,
        score_threshold=0.0,
    )
    return dataclasses.replace(config, **overrides)


def micro_points(seed: int = 0, n_points: int = 12) -> np.ndarray:
    """Random [n x 4] cloud inside the micro grid extent."""
    rng = np.random.default_rng(seed)
    return np.column_stack(
        [
            rng.uniform(0.5, 7.5, n_points),
            rng.uniform(-3.5, 3.5, n_points),
            rng.uniform(-1.0, 1.0, n_points),
            rng.uniform(0.0, 1.0, n_points),
        ]
    )


def synthetic_for(config: TrainConfig, **overrides) -> SyntheticConfig:
    margin = 3.0
    base = SyntheticConfig(
        n_boxes=config.synthetic_boxes,
        n_clutter=config.synthetic_clutter,
        noise=config.synthetic_noise,
        points_per_box=80,
        classes=config.classes,
        headings=(0.0, math.pi / 2),
        x_range=(config.x_min + margin, config.x_max - margin),
        y_range=(config.y_min + margin, config.y_max - margin),
    )
    return dataclasses.replace(base, **overrides)
