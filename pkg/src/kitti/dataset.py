"""
KITTI-layout dataset access.

    <root>/velodyne/<id>.bin
    <root>/label_2/<id>.txt     (optional; absent for test splits)
    <root>/calib/<id>.txt       (optional; canonical transform when absent)
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Optional

from src.core.config import TrainConfig
from src.core.errors import ConfigurationError
from src.core.file_io import read_id_list
from src.kitti.calibration import Calibration, load_calibration
from src.kitti.labels import load_labels
from src.kitti.synthetic import SyntheticConfig, generate_synthetic
from src.kitti.types import Scene
from src.kitti.velodyne import load_velodyne

logger = logging.getLogger(__name__)


def load_split(split_path: Path) -> List[str]:
    """Scene ids listed in a split file, one per line."""
    return read_id_list(split_path)


class KittiDataset:
    """Scenes stored under ``root`` in the KITTI object-detection layout."""

    def __init__(self, root: Path):
        self.root = Path(root)
        if not (self.root / "velodyne").is_dir():
            raise FileNotFoundError(f"No velodyne/ directory under {self.root}")

    def scene_ids(self) -> List[str]:
        return sorted(path.stem for path in (self.root / "velodyne").glob("*.bin"))

    def calibration(self, scene_id: str) -> Calibration:
        path = self.root / "calib" / f"{scene_id}.txt"
        return load_calibration(path) if path.exists() else Calibration.default()

    def load_scene(self, scene_id: str) -> Scene:
        calibration = self.calibration(scene_id)
        points = load_velodyne(self.root / "velodyne" / f"{scene_id}.bin")
        label_path = self.root / "label_2" / f"{scene_id}.txt"
        labels = load_labels(label_path, calibration) if label_path.exists() else []
        return Scene(scene_id=scene_id, points=points, labels=labels)

    def load_scenes(self, scene_ids: Optional[List[str]] = None) -> List[Scene]:
        scene_ids = self.scene_ids() if scene_ids is None else scene_ids
        scenes = [self.load_scene(scene_id) for scene_id in scene_ids]
        logger.info(f"Loaded {len(scenes)} scenes from {self.root}")
        return scenes


def synthetic_config_for(config: TrainConfig) -> SyntheticConfig:
    """Synthetic scene parameters fitted inside the configured BEV extent."""
    margin = 4.0
    return SyntheticConfig(
        n_boxes=config.synthetic_boxes,
        n_clutter=config.synthetic_clutter,
        noise=config.synthetic_noise,
        classes=config.classes,
        headings=config.anchor_headings,
        x_range=(config.x_min + margin, config.x_max - margin),
        y_range=(config.y_min + margin, config.y_max - margin),
    )


def load_scenes(config: TrainConfig, dataset_dir: Optional[str] = None, split_file: Optional[str] = None) -> List[Scene]:
    """
    Scenes for a run: a KITTI directory when one is configured, else generated synthetic scenes.

    Raises:
        ConfigurationError: neither a dataset directory nor a synthetic scene count is set
    """
    dataset_dir = dataset_dir if dataset_dir is not None else config.dataset_dir
    split_file = split_file if split_file is not None else config.split_file
    if dataset_dir:
        dataset = KittiDataset(Path(dataset_dir))
        ids = load_split(Path(split_file)) if split_file else None
        return dataset.load_scenes(ids)
    if config.synthetic_scenes > 0:
        synthetic = synthetic_config_for(config)
        scenes = [
            generate_synthetic(synthetic, config.seed + index, f"{index:06d}") for index in range(config.synthetic_scenes)
        ]
        logger.info(f"Generated {len(scenes)} synthetic scenes (seed {config.seed})")
        return scenes
    raise ConfigurationError("Set dataset_dir or synthetic_scenes to choose the scenes to use")
