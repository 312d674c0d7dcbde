"""
Multi-task detection loss.

    L_cls   = g1 * mean_pos BCE(p, 1) + g2 * mean_neg BCE(p, 0)
    L_reg   = sum over positives and the 7 residual components of smooth-L1
    L_total = a * L_cls + b * L_reg / N_pos

Ignored anchors contribute to neither term; the regression term is 0 without positives.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from src.boxes.anchors import AnchorGrid
from src.boxes.matching import AnchorAssignment, regression_targets
from src.tensor import functional as F
from src.tensor.tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass
class LossBreakdown:
    """
    Scalar loss parts of one step.

    ``reg_loss`` is the unnormalized smooth-L1 sum; ``total`` equals
    ``cls_weight * cls_loss + reg_weight * reg_loss / n_pos`` (regression part 0 when n_pos is 0).
    """

    cls_loss: float
    reg_loss: float
    total: float
    n_pos: int
    n_neg: int
    cls_weight: float = 1.0
    reg_weight: float = 2.0

    def regression_loss(self) -> float:
        return self.reg_loss / self.n_pos if self.n_pos else 0.0

    def recompute_total(self) -> float:
        return self.cls_weight * self.cls_loss + self.reg_weight * self.regression_loss()


def _mean_or_zero(values: Tensor, label: str) -> Tensor:
    if values.size == 0:
        logger.debug(f"No {label} anchors; term set to 0")
        return Tensor(0.0)
    return values.mean()


def classification_loss(
    pos_logits: Tensor, neg_logits: Tensor, pos_weight: float = 1.5, neg_weight: float = 1.0
) -> Tensor:
    """Weighted mean BCE of positives against 1 and negatives against 0; empty sets contribute 0."""
    pos_term = _mean_or_zero(F.bce_with_logits(pos_logits, np.ones(pos_logits.shape)), "positive")
    neg_term = _mean_or_zero(F.bce_with_logits(neg_logits, np.zeros(neg_logits.shape)), "negative")
    return pos_weight * pos_term + neg_weight * neg_term


def regression_loss_sum(pred: Tensor, target: np.ndarray, beta: float = 1.0) -> Tensor:
    """Smooth-L1 summed over positives and components; 0 for an empty set."""
    if pred.size == 0:
        return Tensor(0.0)
    return F.smooth_l1(pred - np.asarray(target, dtype=np.float64), beta).sum()


def regression_loss(pred: Tensor, target: np.ndarray, beta: float = 1.0) -> Tensor:
    """Smooth-L1 sum divided by the number of positives; 0 without positives."""
    n_pos = pred.shape[0] if pred.ndim else 0
    if n_pos == 0:
        return Tensor(0.0)
    return regression_loss_sum(pred, target, beta) / float(n_pos)


def detection_loss(
    logits: Tensor,
    residuals: Tensor,
    assignments: Sequence[AnchorAssignment],
    anchors: AnchorGrid,
    gt_boxes: Sequence[np.ndarray],
    pos_weight: float = 1.5,
    neg_weight: float = 1.0,
    cls_weight: float = 1.0,
    reg_weight: float = 2.0,
    beta: float = 1.0,
) -> Tuple[Tensor, LossBreakdown]:
    """
    Batch loss over anchor-aligned outputs.

    Args:
        logits: [B x M] classification logits
        residuals: [B x M x 7] predicted residuals
        assignments: per-scene anchor assignments
        anchors: anchor grid shared by the batch
        gt_boxes: per-scene [G x 7] ground-truth boxes

    Returns:
        (total loss tensor, breakdown)
    """
    n_anchors = logits.shape[1]
    flat_logits = logits.reshape(-1)
    flat_residuals = residuals.reshape(-1, residuals.shape[-1])

    pos_index, neg_index, targets = [], [], []
    for scene_index, (assignment, boxes) in enumerate(zip(assignments, gt_boxes)):
        offset = scene_index * n_anchors
        pos_index.append(assignment.positive_indices + offset)
        neg_index.append(assignment.negative_indices + offset)
        targets.append(regression_targets(assignment, anchors, boxes))
    positives = np.concatenate(pos_index) if pos_index else np.zeros(0, dtype=np.int64)
    negatives = np.concatenate(neg_index) if neg_index else np.zeros(0, dtype=np.int64)
    target = np.concatenate(targets) if targets else np.zeros((0, 7))

    cls = classification_loss(flat_logits[positives], flat_logits[negatives], pos_weight, neg_weight)
    reg_sum = regression_loss_sum(flat_residuals[positives], target, beta)
    n_pos = len(positives)
    total = cls_weight * cls + (reg_weight / n_pos) * reg_sum if n_pos else cls_weight * cls
    if n_pos == 0:
        logger.warning("Batch without positive anchors; regression term is 0")

    breakdown = LossBreakdown(
        cls_loss=cls.item(),
        reg_loss=reg_sum.item(),
        total=total.item(),
        n_pos=n_pos,
        n_neg=len(negatives),
        cls_weight=cls_weight,
        reg_weight=reg_weight,
    )
    return total, breakdown
