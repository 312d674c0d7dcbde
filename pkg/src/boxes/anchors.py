"""
Anchor grid generation.

Anchors sit at the centers of the head's output cells (half the BEV grid resolution). For cell
(r, c) and per-cell slot a = class_index * n_headings + heading_index, the flat anchor index is
(r * W1 + c) * A + a, matching the head's channel layout.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from src.core.errors import ConfigurationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnchorSize:
    """Per-class anchor extents (l, w, h) and center height in the LIDAR frame."""

    length: float
    width: float
    height: float
    z_center: float


# KITTI per-class mean sizes.
ANCHOR_SIZES: Dict[str, AnchorSize] = {
    "Car": AnchorSize(3.9, 1.6, 1.56, -1.0),
    "Pedestrian": AnchorSize(0.8, 0.6, 1.73, -0.6),
    "Cyclist": AnchorSize(1.76, 0.6, 1.73, -0.6),
}

# (positive, negative) matching thresholds.
MATCH_THRESHOLDS: Dict[str, Tuple[float, float]] = {
    "Car": (0.6, 0.45),
    "Pedestrian": (0.5, 0.35),
    "Cyclist": (0.5, 0.35),
}

NMS_THRESHOLDS: Dict[str, float] = {"Car": 0.7, "Pedestrian": 0.6, "Cyclist": 0.6}

EVAL_IOU_THRESHOLDS: Dict[str, float] = {"Car": 0.7, "Pedestrian": 0.5, "Cyclist": 0.5}


def match_thresholds_for(
    classes: Sequence[str], fallback: Tuple[float, float], per_class: bool = True
) -> Dict[str, Tuple[float, float]]:
    """(positive, negative) matching thresholds keyed by class name; ``fallback`` for classes off the table."""
    return {name: MATCH_THRESHOLDS.get(name, fallback) if per_class else fallback for name in classes}


def nms_thresholds_for(classes: Sequence[str], fallback: float, per_class: bool = True) -> Dict[int, float]:
    """Suppression thresholds keyed by class index, as ``nms_per_class`` expects."""
    return {
        index: NMS_THRESHOLDS.get(name, fallback) if per_class else fallback for index, name in enumerate(classes)
    }


@dataclass
class AnchorGrid:
    """
    Flattened anchors aligned with the head output.

    Attributes:
        boxes: [H1 * W1 * A x 7] anchor boxes (x, y, z, l, w, h, theta)
        class_ids: [H1 * W1 * A] index into ``classes`` for each anchor
        classes: class names in slot order
        shape: (H1, W1)
        anchors_per_cell: A = len(classes) * n_headings
    """

    boxes: np.ndarray
    class_ids: np.ndarray
    classes: Tuple[str, ...]
    shape: Tuple[int, int]
    anchors_per_cell: int

    def __len__(self) -> int:
        return len(self.boxes)

    def flat_index(self, row: int, col: int, slot: int) -> int:
        return (row * self.shape[1] + col) * self.anchors_per_cell + slot


def generate_anchors(
    extent: Tuple[float, float, float, float],
    feature_shape: Tuple[int, int],
    classes: Sequence[str],
    headings: Sequence[float],
    sizes: Dict[str, AnchorSize] = ANCHOR_SIZES,
) -> AnchorGrid:
    """
    Build the anchor grid for a head output of ``feature_shape`` covering ``extent``.

    Args:
        extent: (x_min, x_max, y_min, y_max) in meters
        feature_shape: (H1, W1); rows run along y, columns along x
        classes: class names, one anchor set per class
        headings: anchor headings in radians

    Raises:
        ConfigurationError: unknown class name or empty class/heading list
    """
    if not classes or not headings:
        raise ConfigurationError("anchors need at least one class and one heading")
    unknown = [name for name in classes if name not in sizes]
    if unknown:
        raise ConfigurationError(f"No anchor size for classes {unknown}")

    x_min, x_max, y_min, y_max = extent
    rows, cols = feature_shape
    step_x = (x_max - x_min) / cols
    step_y = (y_max - y_min) / rows
    centers_y, centers_x = np.meshgrid(
        y_min + (np.arange(rows) + 0.5) * step_y,
        x_min + (np.arange(cols) + 0.5) * step_x,
        indexing="ij",
    )

    slots = []
    slot_classes = []
    for class_index, name in enumerate(classes):
        size = sizes[name]
        for heading in headings:
            slots.append((size.z_center, size.length, size.width, size.height, float(heading)))
            slot_classes.append(class_index)
    n_slots = len(slots)
    slot_array = np.array(slots, dtype=np.float64)

    n_cells = rows * cols
    boxes = np.empty((n_cells, n_slots, 7))
    boxes[:, :, 0] = centers_x.reshape(-1, 1)
    boxes[:, :, 1] = centers_y.reshape(-1, 1)
    boxes[:, :, 2:] = slot_array[None, :, :]
    class_ids = np.tile(np.array(slot_classes, dtype=np.int64), n_cells)

    logger.debug(f"Generated {n_cells * n_slots} anchors on a {rows}x{cols} grid with {n_slots} per cell")
    return AnchorGrid(
        boxes=boxes.reshape(-1, 7),
        class_ids=class_ids,
        classes=tuple(classes),
        shape=(rows, cols),
        anchors_per_cell=n_slots,
    )
