"""Greedy non-maximum suppression over oriented boxes."""

from __future__ import annotations

from typing import Callable, Dict, Optional

import numpy as np

from src.boxes.iou import iou_3d_matrix, iou_bev_matrix
from src.core.errors import ConfigurationError

IOU_FUNCTIONS: Dict[str, Callable[[np.ndarray, np.ndarray], np.ndarray]] = {
    "bev": iou_bev_matrix,
    "3d": iou_3d_matrix,
}


def score_order(scores: np.ndarray) -> np.ndarray:
    """Indices by descending score; equal scores keep ascending index order."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    return np.lexsort((np.arange(len(scores)), -scores))


def nms(
    boxes: np.ndarray,
    scores: np.ndarray,
    iou_thresh: float,
    iou_kind: str = "bev",
    max_keep: Optional[int] = None,
) -> np.ndarray:
    """
    Keep the highest-scoring box, drop every remaining box overlapping it by more than
    ``iou_thresh``, and repeat.

    Args:
        boxes: [M x 7] boxes
        scores: [M] scores
        iou_thresh: suppression threshold
        iou_kind: "bev" or "3d"
        max_keep: stop after this many boxes are kept

    Returns:
        kept indices into ``boxes``, in descending score order
    """
    if iou_kind not in IOU_FUNCTIONS:
        raise ConfigurationError(f"iou_kind must be one of {sorted(IOU_FUNCTIONS)}, got '{iou_kind}'")
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 7)
    if len(boxes) != len(np.asarray(scores).reshape(-1)):
        raise ConfigurationError(f"nms: {len(boxes)} boxes but {len(np.asarray(scores).reshape(-1))} scores")
    iou_fn = IOU_FUNCTIONS[iou_kind]

    order = score_order(scores)
    keep = []
    while len(order):
        current = order[0]
        keep.append(int(current))
        if max_keep is not None and len(keep) >= max_keep:
            break
        rest = order[1:]
        if not len(rest):
            break
        overlaps = iou_fn(boxes[current: current + 1], boxes[rest])[0]
        order = rest[overlaps <= iou_thresh]
    return np.array(keep, dtype=np.int64)


def nms_per_class(
    boxes: np.ndarray,
    scores: np.ndarray,
    class_ids: np.ndarray,
    iou_thresh: Dict[int, float],
    iou_kind: str = "bev",
) -> np.ndarray:
    """Run ``nms`` separately for every class; returns kept indices sorted by descending score."""
    class_ids = np.asarray(class_ids, dtype=np.int64).reshape(-1)
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    kept = []
    for class_index in np.unique(class_ids):
        members = np.flatnonzero(class_ids == class_index)
        local = nms(boxes[members], scores[members], iou_thresh[int(class_index)], iou_kind)
        kept.append(members[local])
    if not kept:
        return np.zeros(0, dtype=np.int64)
    merged = np.concatenate(kept)
    return merged[score_order(scores[merged])]
