"""
KITTI-protocol average precision.

Detections are matched to ground truths greedily in descending score order; each ground truth
is matched at most once. Ground truths harder than the evaluated difficulty are "ignored":
detections that hit them count neither as true nor as false positives. Difficulty levels are
cumulative (Moderate includes Easy objects).

Headings are compared only through box overlap, which is unchanged by a half-turn, so a heading
off by pi still matches.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.boxes.anchors import EVAL_IOU_THRESHOLDS
from src.boxes.iou import iou_3d_matrix, iou_bev_matrix
from src.boxes.nms import score_order
from src.core.errors import ConfigurationError
from src.kitti.types import Detection, Difficulty, LabeledBox

logger = logging.getLogger(__name__)

ALL_DIFFICULTIES = "all"
_METRICS = {"bev": iou_bev_matrix, "3d": iou_3d_matrix}


@dataclass
class APResult:
    """AP of one class at one difficulty; ``ap`` is None when there is no ground truth."""

    class_name: str
    difficulty: str
    metric: str
    iou_threshold: float
    ap: Optional[float]
    n_gt: int
    n_det: int
    precision: np.ndarray = field(default_factory=lambda: np.zeros(0))
    recall: np.ndarray = field(default_factory=lambda: np.zeros(0))


@dataclass
class EvalReport:
    """All AP entries of one evaluation run."""

    entries: List[APResult] = field(default_factory=list)

    def get(self, class_name: str, difficulty: str = ALL_DIFFICULTIES, metric: Optional[str] = None) -> APResult:
        for entry in self.entries:
            if entry.class_name == class_name and entry.difficulty == difficulty and metric in (None, entry.metric):
                return entry
        raise KeyError(f"No AP entry for {class_name}/{difficulty}/{metric}")

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {
                "class": entry.class_name,
                "difficulty": entry.difficulty,
                "metric": entry.metric,
                "iou_threshold": entry.iou_threshold,
                "ap": entry.ap,
                "n_gt": entry.n_gt,
                "n_det": entry.n_det,
            }
            for entry in self.entries
        ]
        return pd.DataFrame(rows, columns=["class", "difficulty", "metric", "iou_threshold", "ap", "n_gt", "n_det"])

    def curves_frame(self) -> pd.DataFrame:
        """Long-format precision/recall points of every entry."""
        frames = [
            pd.DataFrame(
                {
                    "class": entry.class_name,
                    "difficulty": entry.difficulty,
                    "metric": entry.metric,
                    "rank": np.arange(1, len(entry.recall) + 1),
                    "recall": entry.recall,
                    "precision": entry.precision,
                }
            )
            for entry in self.entries
        ]
        if not frames:
            return pd.DataFrame(columns=["class", "difficulty", "metric", "rank", "recall", "precision"])
        return pd.concat(frames, ignore_index=True)


def interpolated_ap(precision: np.ndarray, recall: np.ndarray, n_points: int = 11) -> float:
    """
    Interpolated AP in percent.

    11 points sample recall at 0, 0.1, ..., 1; 40 points at 1/40, ..., 1. Each sample takes the
    maximum precision at recall >= r (0 when unreachable).
    """
    if n_points == 11:
        samples = np.linspace(0.0, 1.0, 11)
    elif n_points == 40:
        samples = np.linspace(1.0 / 40.0, 1.0, 40)
    else:
        raise ConfigurationError(f"n_points must be 11 or 40, got {n_points}")
    if len(precision) == 0:
        return 0.0
    total = 0.0
    for r in samples:
        reachable = precision[recall >= r - 1e-12]
        total += reachable.max() if len(reachable) else 0.0
    return 100.0 * total / len(samples)


def _scene_matches(
    detections: Sequence[Detection],
    gts: Sequence[LabeledBox],
    valid: np.ndarray,
    metric: str,
    iou_threshold: float,
) -> List[Tuple[float, int]]:
    """(score, outcome) per detection: outcome 1 TP, 0 FP, -1 ignored."""
    if not detections:
        return []
    scores = np.array([det.score for det in detections])
    order = score_order(scores)
    if gts:
        det_boxes = np.stack([detections[i].box.to_array() for i in order])
        gt_boxes = np.stack([gt.box.to_array() for gt in gts])
        ious = _METRICS[metric](det_boxes, gt_boxes)
    else:
        ious = np.zeros((len(order), 0))

    matched = np.zeros(len(gts), dtype=bool)
    outcomes = []
    for row, det_index in enumerate(order):
        hits = ious[row] >= iou_threshold
        free_valid = np.flatnonzero(hits & valid & ~matched)
        if len(free_valid):
            best = free_valid[int(np.argmax(ious[row, free_valid]))]
            matched[best] = True
            outcomes.append((scores[det_index], 1))
        elif np.any(hits & ~valid):
            outcomes.append((scores[det_index], -1))
        else:
            outcomes.append((scores[det_index], 0))
    return outcomes


def _is_valid(gt: LabeledBox, difficulty: Optional[Difficulty]) -> bool:
    if difficulty is None:
        return True
    level = gt.difficulty
    return level is not Difficulty.UNKNOWN and level.value <= difficulty.value


def evaluate_ap(
    detections: Mapping[str, Sequence[Detection]],
    ground_truths: Mapping[str, Sequence[LabeledBox]],
    class_name: str,
    iou_threshold: float,
    metric: str = "3d",
    n_points: int = 11,
    difficulty: Optional[Difficulty] = None,
    max_workers: int = 4,
) -> APResult:
    """
    AP for one class over all scenes.

    Args:
        detections: scene id -> scored detections
        ground_truths: scene id -> labels (other classes and DontCare rows are skipped)
        class_name: class to evaluate
        iou_threshold: minimum IoU of a true positive
        metric: "bev" or "3d" overlap
        n_points: 11 or 40 interpolation points
        difficulty: cumulative KITTI level, or None to use every ground truth

    Returns:
        APResult; ``ap`` is None when no ground truth of the class is valid
    """
    if metric not in _METRICS:
        raise ConfigurationError(f"metric must be 'bev' or '3d', got '{metric}'")
    scene_ids = sorted(set(detections) | set(ground_truths))

    def per_scene(scene_id: str) -> Tuple[int, List[Tuple[float, int]]]:
        gts = [gt for gt in ground_truths.get(scene_id, ()) if not gt.is_dont_care and gt.type_name == class_name]
        dets = [det for det in detections.get(scene_id, ()) if det.object_class.value == class_name]
        valid = np.array([_is_valid(gt, difficulty) for gt in gts], dtype=bool)
        return int(valid.sum()), _scene_matches(dets, gts, valid, metric, iou_threshold)

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        results = list(pool.map(per_scene, scene_ids))

    n_gt = sum(count for count, _ in results)
    outcomes = [outcome for _, scene in results for outcome in scene if outcome[1] >= 0]
    label = difficulty.name.lower() if difficulty is not None else ALL_DIFFICULTIES
    if n_gt == 0:
        logger.info(f"{class_name}/{label}: no ground truth, AP undefined")
        return APResult(class_name, label, metric, iou_threshold, None, 0, len(outcomes))

    scores = np.array([score for score, _ in outcomes])
    hits = np.array([outcome for _, outcome in outcomes], dtype=np.float64)
    order = score_order(scores) if len(scores) else np.zeros(0, dtype=np.int64)
    tp = np.cumsum(hits[order])
    fp = np.cumsum(1.0 - hits[order])
    recall = tp / n_gt
    precision = tp / np.maximum(tp + fp, 1e-12)
    ap = interpolated_ap(precision, recall, n_points)
    return APResult(class_name, label, metric, iou_threshold, ap, n_gt, len(outcomes), precision, recall)


def evaluate(
    detections: Mapping[str, Sequence[Detection]],
    ground_truths: Mapping[str, Sequence[LabeledBox]],
    classes: Sequence[str],
    metrics: Sequence[str] = ("bev", "3d"),
    n_points: int = 11,
    iou_thresholds: Optional[Dict[str, float]] = None,
) -> EvalReport:
    """
    AP for every class and metric: Easy/Moderate/Hard when ground truths carry 2D metadata,
    otherwise a single "all" entry.
    """
    thresholds = {**EVAL_IOU_THRESHOLDS, **(iou_thresholds or {})}
    has_metadata = any(
        gt.difficulty is not Difficulty.UNKNOWN for labels in ground_truths.values() for gt in labels if gt.box is not None
    )
    levels: List[Optional[Difficulty]] = (
        [Difficulty.EASY, Difficulty.MODERATE, Difficulty.HARD] if has_metadata else [None]
    )
    report = EvalReport()
    for class_name in classes:
        for metric in metrics:
            for level in levels:
                entry = evaluate_ap(
                    detections, ground_truths, class_name, thresholds[class_name], metric, n_points, level
                )
                report.entries.append(entry)
                if entry.ap is not None:
                    logger.info(f"AP {class_name} {entry.difficulty} {metric}@{entry.iou_threshold}: {entry.ap:.2f}")
    return report
