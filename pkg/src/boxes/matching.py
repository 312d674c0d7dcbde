"""Anchor to ground-truth assignment for training targets."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from src.boxes.anchors import AnchorGrid
from src.boxes.codec import encode_boxes
from src.boxes.iou import iou_bev_matrix
from src.core.errors import ConfigurationError

logger = logging.getLogger(__name__)

POSITIVE = 1
NEGATIVE = 0
IGNORE = -1


@dataclass
class AnchorAssignment:
    """
    Per-anchor labels: 1 positive, 0 negative, -1 ignore.

    ``gt_index`` holds the matched ground truth for positives and -1 elsewhere; ``max_iou`` is the
    best same-class BEV IoU of each anchor.
    """

    labels: np.ndarray
    gt_index: np.ndarray
    max_iou: np.ndarray

    @property
    def positive_indices(self) -> np.ndarray:
        return np.flatnonzero(self.labels == POSITIVE)

    @property
    def negative_indices(self) -> np.ndarray:
        return np.flatnonzero(self.labels == NEGATIVE)

    @property
    def n_pos(self) -> int:
        return int(np.count_nonzero(self.labels == POSITIVE))

    @property
    def n_neg(self) -> int:
        return int(np.count_nonzero(self.labels == NEGATIVE))


def _resolve_thresholds(
    classes: Sequence[str],
    pos_thresh: float,
    neg_thresh: float,
    class_thresholds: Optional[Dict[str, Tuple[float, float]]],
) -> Tuple[np.ndarray, np.ndarray]:
    pos = np.full(len(classes), pos_thresh, dtype=np.float64)
    neg = np.full(len(classes), neg_thresh, dtype=np.float64)
    for index, name in enumerate(classes):
        if class_thresholds and name in class_thresholds:
            pos[index], neg[index] = class_thresholds[name]
        if not 0.0 <= neg[index] < pos[index] <= 1.0:
            raise ConfigurationError(
                f"{name}: thresholds must satisfy 0 <= neg < pos <= 1, got neg={neg[index]} pos={pos[index]}"
            )
    return pos, neg


def match_anchors(
    anchors: AnchorGrid,
    gt_boxes: np.ndarray,
    gt_class_ids: np.ndarray,
    pos_thresh: float,
    neg_thresh: float,
    class_thresholds: Optional[Dict[str, Tuple[float, float]]] = None,
) -> AnchorAssignment:
    """
    Assign every anchor to positive, negative or ignore using same-class BEV IoU.

    An anchor is positive if its IoU with some ground truth reaches ``pos_thresh``, negative if
    its IoU with every ground truth is below ``neg_thresh``, ignored otherwise. Each ground truth
    also claims its highest-IoU anchor (or, when it overlaps no anchor at all, the anchor of its
    class with the nearest center), so every ground truth has at least one positive.

    Args:
        anchors: anchor grid
        gt_boxes: [G x 7] ground-truth boxes
        gt_class_ids: [G] indices into ``anchors.classes``
        pos_thresh: positive IoU threshold
        neg_thresh: negative IoU threshold
        class_thresholds: optional per-class (pos, neg) overrides keyed by class name

    Raises:
        ConfigurationError: thresholds out of order
    """
    pos_by_class, neg_by_class = _resolve_thresholds(anchors.classes, pos_thresh, neg_thresh, class_thresholds)
    n_anchors = len(anchors)
    gt_boxes = np.asarray(gt_boxes, dtype=np.float64).reshape(-1, 7)
    gt_class_ids = np.asarray(gt_class_ids, dtype=np.int64).reshape(-1)

    labels = np.full(n_anchors, NEGATIVE, dtype=np.int8)
    gt_index = np.full(n_anchors, -1, dtype=np.int64)
    max_iou = np.zeros(n_anchors)
    if len(gt_boxes) == 0:
        return AnchorAssignment(labels, gt_index, max_iou)

    ious = np.zeros((n_anchors, len(gt_boxes)))
    for class_index in np.unique(gt_class_ids):
        anchor_rows = np.flatnonzero(anchors.class_ids == class_index)
        gt_cols = np.flatnonzero(gt_class_ids == class_index)
        if len(anchor_rows) == 0:
            logger.warning(f"No anchors of class index {class_index}; {len(gt_cols)} ground truths unmatched")
            continue
        ious[np.ix_(anchor_rows, gt_cols)] = iou_bev_matrix(anchors.boxes[anchor_rows], gt_boxes[gt_cols])

    best_gt = np.argmax(ious, axis=1)
    max_iou = ious[np.arange(n_anchors), best_gt]
    anchor_pos = pos_by_class[anchors.class_ids]
    anchor_neg = neg_by_class[anchors.class_ids]

    labels[max_iou >= anchor_neg] = IGNORE
    positive = max_iou >= anchor_pos
    labels[positive] = POSITIVE
    gt_index[positive] = best_gt[positive]

    for g in range(len(gt_boxes)):
        candidates = np.flatnonzero(anchors.class_ids == gt_class_ids[g])
        if len(candidates) == 0:
            continue
        column = ious[candidates, g]
        if column.max() > 0.0:
            best = candidates[int(np.argmax(column))]
        else:
            dist = np.hypot(anchors.boxes[candidates, 0] - gt_boxes[g, 0], anchors.boxes[candidates, 1] - gt_boxes[g, 1])
            best = candidates[int(np.argmin(dist))]
        labels[best] = POSITIVE
        gt_index[best] = g

    return AnchorAssignment(labels, gt_index, max_iou)


def regression_targets(assignment: AnchorAssignment, anchors: AnchorGrid, gt_boxes: np.ndarray) -> np.ndarray:
    """Encoded residuals [n_pos x 7] for the positive anchors, in ``positive_indices`` order."""
    positives = assignment.positive_indices
    gt_boxes = np.asarray(gt_boxes, dtype=np.float64).reshape(-1, 7)
    if len(positives) == 0:
        return np.zeros((0, 7))
    return encode_boxes(gt_boxes[assignment.gt_index[positives]], anchors.boxes[positives])
