"""KITTI point clouds, labels and calibration, plus synthetic desk-scale scenes."""

from src.kitti.labels import load_labels, save_detections
from src.kitti.synthetic import generate_synthetic
from src.kitti.types import Detection, Difficulty, LabeledBox, ObjectClass, Scene
from src.kitti.velodyne import load_velodyne, save_velodyne

__all__ = [
    "Detection",
    "Difficulty",
    "LabeledBox",
    "ObjectClass",
    "Scene",
    "generate_synthetic",
    "load_labels",
    "load_velodyne",
    "save_detections",
    "save_velodyne",
]
