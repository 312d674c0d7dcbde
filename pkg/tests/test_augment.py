"""Tests for global scene augmentation."""

import math

import numpy as np
import pytest

from src.boxes.box import Box7
from src.boxes.iou import points_in_box
from src.kitti.synthetic import SyntheticConfig, generate_synthetic
from src.kitti.types import LabeledBox, ObjectClass, Scene
from src.training.augment import AugmentConfig, augment, transform_scene
from tests.helpers import small_config


def _scene() -> Scene:
    box = Box7(2.0, 1.0, 0.0, 4.0, 2.0, 1.5, 0.3)
    points = np.array([[1.0, 2.0, 0.5, 0.2], [3.0, 0.0, -0.5, 0.9]])
    return Scene("000001", points, [LabeledBox(box=box, object_class=ObjectClass.CAR)])


def _membership(scene: Scene) -> list:
    return [int(np.count_nonzero(points_in_box(scene.points, label.box.to_array()))) for label in scene.labels]


class TestTransformScene:
    """Deterministic transforms."""

    def test_flip_negates_y_and_heading(self):
        flipped = transform_scene(_scene(), flip=True)
        np.testing.assert_allclose(flipped.points[:, 1], [-2.0, 0.0])
        assert flipped.labels[0].box.y == pytest.approx(-1.0)
        assert flipped.labels[0].box.theta == pytest.approx(-0.3)

    def test_rotation_turns_points_and_headings(self):
        rotated = transform_scene(_scene(), angle=math.pi / 2)
        np.testing.assert_allclose(rotated.points[:, :2], [[-2.0, 1.0], [0.0, 3.0]], atol=1e-12)
        box = rotated.labels[0].box
        assert (box.x, box.y) == (pytest.approx(-1.0), pytest.approx(2.0))
        assert box.theta == pytest.approx(0.3 + math.pi / 2)

    def test_scaling(self):
        scaled = transform_scene(_scene(), scale=1.05)
        box = scaled.labels[0].box
        np.testing.assert_allclose(scaled.points[:, :3], _scene().points[:, :3] * 1.05)
        assert (box.l, box.w, box.h) == (pytest.approx(4.2), pytest.approx(2.1), pytest.approx(1.575))

    def test_intensity_untouched(self):
        scene = transform_scene(_scene(), flip=True, angle=0.4, scale=0.97)
        np.testing.assert_array_equal(scene.points[:, 3], _scene().points[:, 3])

    def test_dont_care_rows_pass_through(self):
        scene = _scene()
        scene.labels.append(LabeledBox(box=None, object_class=ObjectClass.DONT_CARE))
        assert transform_scene(scene, angle=1.0).labels[1].box is None


class TestAugment:
    """Seeded random transforms."""

    def test_same_seed_same_result(self):
        scene = generate_synthetic(SyntheticConfig(), 0)
        np.testing.assert_array_equal(augment(scene, 5).points, augment(scene, 5).points)
        assert not np.array_equal(augment(scene, 5).points, augment(scene, 6).points)

    def test_disabled_is_identity(self):
        scene = _scene()
        config = AugmentConfig(rotation=False, scaling=False, flip=False)
        assert augment(scene, 3, config) is scene

    def test_membership_preserved(self):
        """Every box holds exactly the same number of points after augmentation."""
        scene = generate_synthetic(SyntheticConfig(n_boxes=4, n_clutter=200), 2)
        before = _membership(scene)
        for seed in range(10):
            assert _membership(augment(scene, seed)) == before

    def test_from_train_config(self):
        assert not AugmentConfig.from_train_config(small_config()).enabled
        enabled = AugmentConfig.from_train_config(small_config(augment=True))
        assert enabled.enabled
        assert enabled.max_rotation == pytest.approx(small_config().aug_rotation)
