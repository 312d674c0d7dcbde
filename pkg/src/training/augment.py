"""
Global scene augmentation applied jointly to points and label boxes: mirror across the x axis,
rotation about z, uniform scaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from src.boxes.box import Box7
from src.core.config import TrainConfig
from src.kitti.types import Scene


@dataclass
class AugmentConfig:
    """Individually switchable transforms; all disabled is the identity."""

    rotation: bool = True
    scaling: bool = True
    flip: bool = True
    max_rotation: float = math.pi / 4
    scale_min: float = 0.95
    scale_max: float = 1.05

    @classmethod
    def from_train_config(cls, config: TrainConfig) -> "AugmentConfig":
        return cls(
            rotation=config.augment and config.aug_rotation > 0,
            scaling=config.augment and config.aug_scale_min != config.aug_scale_max,
            flip=config.augment and config.aug_flip,
            max_rotation=config.aug_rotation,
            scale_min=config.aug_scale_min,
            scale_max=config.aug_scale_max,
        )

    @property
    def enabled(self) -> bool:
        return self.rotation or self.scaling or self.flip


def _transform_box(box: Box7, flip: bool, angle: float, scale: float) -> Box7:
    x, y, theta = box.x, box.y, box.theta
    if flip:
        y, theta = -y, -theta
    cos_a, sin_a = math.cos(angle), math.sin(angle)
    x, y = x * cos_a - y * sin_a, x * sin_a + y * cos_a
    return Box7(x * scale, y * scale, box.z * scale, box.l * scale, box.w * scale, box.h * scale, theta + angle)


def transform_scene(scene: Scene, flip: bool = False, angle: float = 0.0, scale: float = 1.0) -> Scene:
    """Apply the mirror (y -> -y), then rotation by ``angle`` about z, then scaling."""
    points = scene.points.copy()
    if flip:
        points[:, 1] = -points[:, 1]
    cos_a, sin_a = math.cos(angle), math.sin(angle)
    x, y = points[:, 0].copy(), points[:, 1].copy()
    points[:, 0] = x * cos_a - y * sin_a
    points[:, 1] = x * sin_a + y * cos_a
    points[:, :3] *= scale

    labels = [
        label if label.box is None else replace(label, box=_transform_box(label.box, flip, angle, scale))
        for label in scene.labels
    ]
    return Scene(scene_id=scene.scene_id, points=points, labels=labels)


def augment(scene: Scene, seed: Union[int, np.random.Generator], config: Optional[AugmentConfig] = None) -> Scene:
    """
    Randomly transformed copy of ``scene``; the draw depends only on ``seed``.

    Rotation is U(-max_rotation, max_rotation), scale U(scale_min, scale_max), flip with
    probability 1/2.
    """
    config = config or AugmentConfig()
    if not config.enabled:
        return scene
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    flip = bool(rng.random() < 0.5) if config.flip else False
    angle = float(rng.uniform(-config.max_rotation, config.max_rotation)) if config.rotation else 0.0
    scale = float(rng.uniform(config.scale_min, config.scale_max)) if config.scaling else 1.0
    return transform_scene(scene, flip, angle, scale)
