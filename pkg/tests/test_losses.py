"""Tests for the detection loss and learning-rate schedule."""

import logging
import math

import numpy as np
import pytest

from src.boxes.anchors import generate_anchors
from src.boxes.matching import match_anchors, regression_targets
from src.core.errors import ConfigurationError
from src.training.losses import (
    LossBreakdown,
    classification_loss,
    detection_loss,
    regression_loss,
    regression_loss_sum,
)
from src.training.schedule import lr_schedule
from src.tensor.tensor import Tensor


def _bce(logit: float, target: float) -> float:
    probability = 1.0 / (1.0 + math.exp(-logit))
    return -(target * math.log(probability) + (1.0 - target) * math.log(1.0 - probability))


def _smooth_l1(x: float, beta: float = 1.0) -> float:
    return 0.5 * x * x / beta if abs(x) < beta else abs(x) - 0.5 * beta


class TestClassificationLoss:
    """Weighted mean BCE."""

    def test_zero_logit_positive(self):
        """One positive at p = 0.5: 1.5 * ln 2."""
        loss = classification_loss(Tensor(np.zeros(1)), Tensor(np.zeros(0)))
        assert loss.item() == pytest.approx(1.5 * math.log(2.0), abs=1e-12)

    def test_means_over_each_set(self):
        pos, neg = np.array([2.0, -1.0]), np.array([0.5, -3.0, 1.0])
        expected = 1.5 * np.mean([_bce(x, 1.0) for x in pos]) + 1.0 * np.mean([_bce(x, 0.0) for x in neg])
        assert classification_loss(Tensor(pos), Tensor(neg)).item() == pytest.approx(expected, abs=1e-12)

    def test_extreme_logits_stay_finite(self):
        loss = classification_loss(Tensor(np.array([-800.0])), Tensor(np.array([800.0])))
        assert loss.item() == pytest.approx(1.5 * 800.0 + 800.0)


class TestRegressionLoss:
    """Smooth-L1 over positives."""

    def test_quadratic_branch(self):
        pred = Tensor(np.array([[0.5, 0, 0, 0, 0, 0, 0]]))
        assert regression_loss(pred, np.zeros((1, 7))).item() == pytest.approx(0.125)

    def test_linear_branch(self):
        pred = Tensor(np.array([[2.0, 0, 0, 0, 0, 0, 0]]))
        assert regression_loss(pred, np.zeros((1, 7))).item() == pytest.approx(1.5)

    def test_beta(self):
        """With beta 1.5 the quadratic branch is 0.5 * x^2 / beta."""
        pred = Tensor(np.array([[0.5, 0, 0, 0, 0, 0, 0]]))
        assert regression_loss(pred, np.zeros((1, 7)), beta=1.5).item() == pytest.approx(0.125 / 1.5)

    def test_divided_by_positives(self):
        pred = Tensor(np.full((4, 7), 0.2))
        assert regression_loss(pred, np.zeros((4, 7))).item() == pytest.approx(7 * 0.02)
        assert regression_loss_sum(pred, np.zeros((4, 7))).item() == pytest.approx(4 * 7 * 0.02)

    def test_no_positives(self):
        assert regression_loss(Tensor(np.zeros((0, 7))), np.zeros((0, 7))).item() == 0.0


class TestDetectionLoss:
    """Assembly of the total loss from its parts."""

    def _setup(self, rng: np.random.Generator, gt_boxes):
        grid = generate_anchors((0.0, 8.0, -4.0, 4.0), (4, 4), ("Car",), (0.0, math.pi / 2))
        assignments = [match_anchors(grid, boxes, np.zeros(len(boxes), dtype=np.int64), 0.6, 0.45) for boxes in gt_boxes]
        logits = rng.normal(size=(len(gt_boxes), len(grid)))
        residuals = rng.normal(size=(len(gt_boxes), len(grid), 7))
        return grid, assignments, logits, residuals

    def test_matches_independent_recomputation(self):
        """total = 1 * cls + 2 * reg / N_pos, recomputed scalar by scalar."""
        rng = np.random.default_rng(0)
        gt_boxes = [
            np.array([[3.0, 1.0, -1.0, 3.9, 1.6, 1.56, 0.1]]),
            np.array([[5.0, -1.0, -1.0, 3.9, 1.6, 1.56, 1.5], [1.0, 1.0, -1.0, 3.9, 1.6, 1.56, 0.0]]),
        ]
        grid, assignments, logits, residuals = self._setup(rng, gt_boxes)
        total, breakdown = detection_loss(Tensor(logits), Tensor(residuals), assignments, grid, gt_boxes)

        pos_terms, neg_terms, reg_sum = [], [], 0.0
        for scene, (assignment, boxes) in enumerate(zip(assignments, gt_boxes)):
            pos_terms += [_bce(logits[scene, i], 1.0) for i in assignment.positive_indices]
            neg_terms += [_bce(logits[scene, i], 0.0) for i in assignment.negative_indices]
            targets = regression_targets(assignment, grid, boxes)
            for row, i in enumerate(assignment.positive_indices):
                reg_sum += sum(_smooth_l1(residuals[scene, i, k] - targets[row, k]) for k in range(7))
        n_pos = len(pos_terms)
        cls = 1.5 * np.mean(pos_terms) + np.mean(neg_terms)

        assert breakdown.n_pos == n_pos >= 3
        assert breakdown.n_neg == len(neg_terms)
        assert breakdown.cls_loss == pytest.approx(cls, rel=1e-12)
        assert breakdown.reg_loss == pytest.approx(reg_sum, rel=1e-12)
        assert total.item() == pytest.approx(cls + 2.0 * reg_sum / n_pos, rel=1e-12)
        assert breakdown.recompute_total() == pytest.approx(breakdown.total, rel=1e-12)

    def test_no_positives(self, caplog):
        """Scenes without ground truth: regression term 0, classification positive."""
        rng = np.random.default_rng(1)
        gt_boxes = [np.zeros((0, 7)), np.zeros((0, 7))]
        grid, assignments, logits, residuals = self._setup(rng, gt_boxes)
        with caplog.at_level(logging.WARNING):
            total, breakdown = detection_loss(Tensor(logits), Tensor(residuals), assignments, grid, gt_boxes)
        expected = np.mean([_bce(x, 0.0) for x in logits.reshape(-1)])
        assert breakdown.n_pos == 0
        assert breakdown.reg_loss == 0.0
        assert breakdown.regression_loss() == 0.0
        assert total.item() == pytest.approx(expected, rel=1e-12)
        assert breakdown.cls_loss > 0.0
        assert "without positive anchors" in caplog.text

    def test_custom_weights(self):
        breakdown = LossBreakdown(cls_loss=0.8, reg_loss=3.0, total=0.0, n_pos=2, n_neg=10, cls_weight=0.5, reg_weight=4.0)
        assert breakdown.recompute_total() == pytest.approx(0.5 * 0.8 + 4.0 * 1.5)


class TestLrSchedule:
    """Step decay."""

    @pytest.mark.parametrize(
        "epoch, expected", [(0, 1e-3), (139, 1e-3), (140, 1e-4), (150, 1e-4), (160, 1e-5), (180, 1e-6), (185, 1e-6)]
    )
    def test_defaults(self, epoch, expected):
        assert lr_schedule(epoch) == pytest.approx(expected, rel=1e-12)

    def test_custom(self):
        assert lr_schedule(5, base_lr=0.01, decay_start=2, decay_every=2, decay_factor=0.5) == pytest.approx(0.0025)

    def test_invalid(self):
        with pytest.raises(ConfigurationError):
            lr_schedule(-1)
        with pytest.raises(ConfigurationError):
            lr_schedule(10, decay_every=0)
