"""Tests for anchor matching and non-maximum suppression."""

import math

import numpy as np
import pytest

from src.boxes.anchors import generate_anchors, match_thresholds_for, nms_thresholds_for
from src.boxes.iou import iou_3d, iou_bev
from src.boxes.matching import IGNORE, NEGATIVE, POSITIVE, match_anchors, regression_targets
from src.boxes.nms import nms, nms_per_class, score_order
from src.core.errors import ConfigurationError

EXTENT = (0.0, 16.0, -8.0, 8.0)


def _grid(classes=("Car",)):
    return generate_anchors(EXTENT, (8, 8), classes, (0.0, math.pi / 2))


def _nms_reference(boxes: np.ndarray, scores: np.ndarray, thresh: float, iou_fn=iou_bev) -> list:
    """O(n^2) greedy: walk by (score desc, index asc), keep a box unless a kept one overlaps it too much."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    kept = []
    for i in order:
        if all(iou_fn(boxes[i], boxes[j]) <= thresh for j in kept):
            kept.append(i)
    return kept


def _cluttered_boxes(rng: np.random.Generator, n: int) -> np.ndarray:
    centers = rng.uniform(0.0, 10.0, size=(4, 2))
    picks = centers[rng.integers(4, size=n)] + rng.normal(0.0, 0.6, size=(n, 2))
    return np.column_stack(
        [
            picks,
            rng.uniform(-1.2, -0.8, n),
            rng.uniform(3.5, 4.3, n),
            rng.uniform(1.4, 1.8, n),
            rng.uniform(1.4, 1.7, n),
            rng.uniform(-math.pi, math.pi, n),
        ]
    )


class TestMatchAnchors:
    """Positive / negative / ignore assignment."""

    def test_exact_anchor_is_positive(self):
        """A ground truth identical to an anchor claims it with IoU 1."""
        grid = _grid()
        target = grid.flat_index(3, 5, 1)
        assignment = match_anchors(grid, grid.boxes[target: target + 1], np.array([0]), 0.6, 0.45)
        assert assignment.labels[target] == POSITIVE
        assert assignment.gt_index[target] == 0
        assert assignment.max_iou[target] == pytest.approx(1.0)
        targets = regression_targets(assignment, grid, grid.boxes[target: target + 1])
        row = assignment.positive_indices.tolist().index(target)
        np.testing.assert_allclose(targets[row], 0.0, atol=1e-12)

    def test_thresholds_partition_anchors(self):
        """Labels follow max IoU: >= pos positive, < neg negative, between ignored."""
        grid = _grid()
        gt = np.array([[6.3, 1.1, -1.0, 3.9, 1.6, 1.56, 0.2]])
        assignment = match_anchors(grid, gt, np.array([0]), 0.6, 0.45)
        forced = np.flatnonzero((assignment.labels == POSITIVE) & (assignment.max_iou < 0.6))
        assert len(forced) <= 1
        for index, (label, value) in enumerate(zip(assignment.labels, assignment.max_iou)):
            if index in forced:
                continue
            if value >= 0.6:
                assert label == POSITIVE
            elif value < 0.45:
                assert label == NEGATIVE
            else:
                assert label == IGNORE

    def test_every_ground_truth_gets_a_positive(self):
        """A box between anchor centers with low IoU still claims its best anchor."""
        grid = _grid()
        gt = np.array([[7.0, 1.0, -1.0, 3.9, 1.6, 1.56, math.pi / 4], [12.0, -5.0, -1.0, 3.9, 1.6, 1.56, 1.0]])
        assignment = match_anchors(grid, gt, np.array([0, 0]), 0.95, 0.9)
        assert set(assignment.gt_index[assignment.positive_indices]) == {0, 1}

    def test_classes_do_not_cross_match(self):
        """A pedestrian label never makes a cyclist anchor positive."""
        grid = _grid(("Pedestrian", "Cyclist"))
        pedestrian_slot = grid.flat_index(2, 2, 0)
        gt = grid.boxes[pedestrian_slot: pedestrian_slot + 1]
        assignment = match_anchors(grid, gt, np.array([0]), 0.5, 0.35)
        assert np.all(grid.class_ids[assignment.positive_indices] == 0)
        assert np.all(assignment.max_iou[grid.class_ids == 1] == 0.0)

    def test_no_ground_truth_all_negative(self):
        assignment = match_anchors(_grid(), np.zeros((0, 7)), np.zeros(0), 0.6, 0.45)
        assert assignment.n_neg == len(_grid())
        assert assignment.n_pos == 0
        assert regression_targets(assignment, _grid(), np.zeros((0, 7))).shape == (0, 7)

    def test_per_class_thresholds(self):
        """Overrides are keyed by class name and validated."""
        grid = _grid(("Pedestrian", "Cyclist"))
        with pytest.raises(ConfigurationError, match="Cyclist"):
            match_anchors(grid, np.zeros((0, 7)), np.zeros(0), 0.5, 0.35, {"Cyclist": (0.3, 0.4)})


class TestNms:
    """Greedy suppression."""

    @pytest.mark.parametrize("thresh", [0.1, 0.3, 0.7])
    def test_matches_quadratic_reference(self, thresh):
        """Same kept indices as the O(n^2) reference on cluttered random boxes."""
        rng = np.random.default_rng(0)
        for _ in range(20):
            n = int(rng.integers(1, 40))
            boxes = _cluttered_boxes(rng, n)
            scores = np.round(rng.uniform(0.0, 1.0, n), 1)
            assert nms(boxes, scores, thresh).tolist() == _nms_reference(boxes, scores, thresh)

    def test_3d_kind(self):
        """3D IoU suppression agrees with the reference too."""
        rng = np.random.default_rng(1)
        boxes = _cluttered_boxes(rng, 25)
        boxes[:, 2] += rng.uniform(-1.0, 1.0, 25)
        scores = rng.uniform(size=25)
        assert nms(boxes, scores, 0.3, "3d").tolist() == _nms_reference(boxes, scores, 0.3, iou_3d)

    def test_duplicates_suppressed_ties_by_index(self):
        """Equal scores keep the lower index."""
        box = [5.0, 0.0, -1.0, 3.9, 1.6, 1.56, 0.0]
        assert nms(np.array([box, box, box]), np.array([0.5, 0.5, 0.5]), 0.7).tolist() == [0]

    def test_max_keep(self):
        boxes = np.array([[float(i * 10), 0.0, -1.0, 3.9, 1.6, 1.56, 0.0] for i in range(5)])
        assert nms(boxes, np.arange(5.0), 0.5, max_keep=2).tolist() == [4, 3]

    def test_empty_input(self):
        assert nms(np.zeros((0, 7)), np.zeros(0), 0.5).tolist() == []

    def test_invalid_arguments(self):
        with pytest.raises(ConfigurationError):
            nms(np.zeros((1, 7)) + 1.0, np.ones(1), 0.5, iou_kind="2d")
        with pytest.raises(ConfigurationError):
            nms(np.ones((2, 7)), np.ones(3), 0.5)

    def test_per_class_keeps_overlaps_across_classes(self):
        """Identical boxes of different classes both survive."""
        box = [5.0, 0.0, -1.0, 1.0, 0.6, 1.7, 0.0]
        kept = nms_per_class(np.array([box, box, box]), np.array([0.9, 0.8, 0.7]), np.array([0, 1, 0]), {0: 0.5, 1: 0.5})
        assert kept.tolist() == [0, 1]

    def test_score_order_stable(self):
        assert score_order(np.array([0.2, 0.9, 0.2, 0.9])).tolist() == [1, 3, 0, 2]


class TestClassThresholds:
    """Car and Pedestrian anchors in one grid keep their own thresholds."""

    CLASSES = ("Car", "Pedestrian")

    def _single_cell(self):
        # slots: Car 0, Car pi/2, Pedestrian 0, Pedestrian pi/2
        return generate_anchors((-1.0, 1.0, -1.0, 1.0), (1, 1), self.CLASSES, (0.0, math.pi / 2))

    def test_tables(self):
        assert match_thresholds_for(self.CLASSES, (0.6, 0.45)) == {"Car": (0.6, 0.45), "Pedestrian": (0.5, 0.35)}
        assert match_thresholds_for(self.CLASSES, (0.6, 0.45), per_class=False) == {
            "Car": (0.6, 0.45),
            "Pedestrian": (0.6, 0.45),
        }
        assert nms_thresholds_for(self.CLASSES, 0.7) == {0: 0.7, 1: 0.6}
        assert nms_thresholds_for(self.CLASSES, 0.7, per_class=False) == {0: 0.7, 1: 0.7}

    def test_pedestrian_matched_at_its_own_thresholds(self):
        """A crossed Pedestrian anchor at BEV IoU ~0.52 is positive at 0.5/0.35, ignored at 0.6/0.45."""
        grid = self._single_cell()
        gt = np.array([[0.15, 0.0, -0.6, 0.8, 0.6, 1.73, 0.0]])
        assert iou_bev(grid.boxes[3], gt[0]) == pytest.approx(0.33 / 0.63)

        per_class = match_anchors(
            grid, gt, np.array([1]), 0.6, 0.45, match_thresholds_for(self.CLASSES, (0.6, 0.45))
        )
        uniform = match_anchors(
            grid, gt, np.array([1]), 0.6, 0.45, match_thresholds_for(self.CLASSES, (0.6, 0.45), per_class=False)
        )

        assert per_class.labels.tolist() == [NEGATIVE, NEGATIVE, POSITIVE, POSITIVE]
        assert uniform.labels.tolist() == [NEGATIVE, NEGATIVE, POSITIVE, IGNORE]

    def test_pedestrians_suppressed_at_their_own_threshold(self):
        """Pairs at BEV IoU ~0.65: the Pedestrian pair collapses at 0.6, the Car pair survives at 0.7."""
        pedestrians = np.array([[0.0, 0.0, -0.6, 0.8, 0.6, 1.73, 0.0], [0.17, 0.0, -0.6, 0.8, 0.6, 1.73, 0.0]])
        cars = np.array([[10.0, 0.0, -1.0, 3.9, 1.6, 1.56, 0.0], [10.83, 0.0, -1.0, 3.9, 1.6, 1.56, 0.0]])
        boxes = np.vstack([cars, pedestrians])
        scores = np.array([0.9, 0.8, 0.7, 0.6])
        class_ids = np.array([0, 0, 1, 1])
        assert 0.6 < iou_bev(pedestrians[0], pedestrians[1]) < 0.7
        assert 0.6 < iou_bev(cars[0], cars[1]) < 0.7

        per_class = nms_per_class(boxes, scores, class_ids, nms_thresholds_for(self.CLASSES, 0.7))
        uniform = nms_per_class(boxes, scores, class_ids, nms_thresholds_for(self.CLASSES, 0.7, per_class=False))

        assert per_class.tolist() == [0, 1, 2]
        assert uniform.tolist() == [0, 1, 2, 3]
