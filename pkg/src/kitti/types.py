"""Scene, label and detection records shared by the KITTI readers and writers."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from src.boxes.box import Box7


class ObjectClass(Enum):
    """Label categories. KITTI types outside the three detection classes load as DONT_CARE."""

    CAR = "Car"
    PEDESTRIAN = "Pedestrian"
    CYCLIST = "Cyclist"
    DONT_CARE = "DontCare"

    @classmethod
    def from_type_name(cls, type_name: str) -> "ObjectClass":
        for member in cls:
            if member.value == type_name:
                return member
        return cls.DONT_CARE


class Difficulty(Enum):
    """KITTI difficulty levels; ordered so that easier levels compare lower."""

    EASY = 0
    MODERATE = 1
    HARD = 2
    UNKNOWN = 3


# (min 2D box height px, max occlusion level, max truncation) per level.
DIFFICULTY_RULES = {
    Difficulty.EASY: (40.0, 0, 0.15),
    Difficulty.MODERATE: (25.0, 1, 0.30),
    Difficulty.HARD: (25.0, 2, 0.50),
}


def difficulty_from_2d(bbox_height: float, occlusion: int, truncation: float) -> Difficulty:
    """Easiest KITTI level whose thresholds the object meets; Unknown when no 2D box is present."""
    if bbox_height <= 0:
        return Difficulty.UNKNOWN
    for level, (min_height, max_occlusion, max_truncation) in DIFFICULTY_RULES.items():
        if bbox_height >= min_height and occlusion <= max_occlusion and truncation <= max_truncation:
            return level
    return Difficulty.UNKNOWN


@dataclass
class LabeledBox:
    """
    One KITTI label row.

    ``box`` is in the LIDAR frame and is None for DontCare rows, whose raw camera-frame
    fields (h, w, l, x, y, z, ry) are kept in ``raw_3d`` so they write back unchanged.
    """

    box: Optional[Box7]
    object_class: ObjectClass
    type_name: str = ""
    truncation: float = 0.0
    occlusion: int = 0
    alpha: float = -10.0
    bbox_2d: Tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    raw_3d: Optional[Tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if not self.type_name:
            self.type_name = self.object_class.value

    @property
    def is_dont_care(self) -> bool:
        return self.object_class is ObjectClass.DONT_CARE or self.box is None

    @property
    def difficulty(self) -> Difficulty:
        height = self.bbox_2d[3] - self.bbox_2d[1]
        return difficulty_from_2d(height, self.occlusion, self.truncation)


@dataclass
class Detection(LabeledBox):
    """A decoded, scored prediction."""

    score: float = 0.0


@dataclass
class Scene:
    """Point cloud [n x 4] (x, y, z, intensity) with its labels."""

    scene_id: str
    points: np.ndarray
    labels: List[LabeledBox] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.points)

    def boxes_for(self, classes: Tuple[str, ...]) -> Tuple[np.ndarray, np.ndarray]:
        """[G x 7] LIDAR boxes and [G] class indices for labels whose class is in ``classes``."""
        rows = []
        class_ids = []
        for label in self.labels:
            if label.is_dont_care or label.object_class.value not in classes:
                continue
            rows.append(label.box.to_array())
            class_ids.append(classes.index(label.object_class.value))
        if not rows:
            return np.zeros((0, 7)), np.zeros(0, dtype=np.int64)
        return np.stack(rows), np.array(class_ids, dtype=np.int64)
