"""
Run configuration for the SVGA detection toolkit.

``TrainConfig`` holds every tunable of the pipeline. Defaults mirror the published car network;
``TrainConfig.for_class`` and ``TrainConfig.desk_preset`` give the other shipped presets.
Configuration files are flat ``key = value`` text (or JSON with the same keys).
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Tuple, get_type_hints

from src.core.errors import ConfigurationError
from src.core.file_io import ensure_parent_dir, load_json_with_bom

logger = logging.getLogger(__name__)

CLASS_GROUPS = {
    "car": ("Car",),
    "pedcyc": ("Pedestrian", "Cyclist"),
}

_TRUE_WORDS = {"1", "true", "yes", "on"}
_FALSE_WORDS = {"0", "false", "no", "off"}


@dataclass
class TrainConfig:
    """All pipeline hyperparameters. Field names are the config-file keys."""

    # Spherical voxel grouping
    num_voxels: int = 1024
    radius: float = 1.8
    max_points_per_voxel: int = 64
    fps_seed_index: int = 0
    relative_coords: bool = True

    # Voxel-graph network
    point_mlp_sizes: Tuple[int, ...] = (64, 128, 128)
    global_mlp_sizes: Tuple[int, ...] = (64, 128, 128)
    num_attention_layers: int = 3
    attention_mlp_sizes: Tuple[int, ...] = (128, 128, 128, 256, 512, 1024)
    knn_k: int = 3
    global_attention: bool = True
    gate_mode: str = "voxel"
    attention_epsilon: float = 1e-8

    # Bird's-eye-view grid
    x_min: float = 0.0
    x_max: float = 70.4
    y_min: float = -40.0
    y_max: float = 40.0
    grid_resolution: float = 0.4
    bev_channels: int = 64

    # Sparse-to-dense regression head
    block_channels: Tuple[int, ...] = (64, 128, 256)
    convs_per_block: int = 4
    branch_channels: int = 128
    branch_convs: int = 2
    fused_channels: int = 128
    head_variant: str = "sdr"

    # Anchors, matching and post-processing
    classes: Tuple[str, ...] = ("Car",)
    anchor_headings: Tuple[float, ...] = (0.0, math.pi / 2)
    pos_iou_thresh: float = 0.6
    neg_iou_thresh: float = 0.45
    nms_iou_thresh: float = 0.7
    # KITTI per-class matching and NMS thresholds; off applies the three values above to every class
    per_class_thresholds: bool = True
    nms_iou_kind: str = "bev"
    score_threshold: float = 0.3
    pre_nms_top_k: int = 100
    max_detections: int = 50

    # Loss weights
    cls_pos_weight: float = 1.5
    cls_neg_weight: float = 1.0
    loss_cls_weight: float = 1.0
    loss_reg_weight: float = 2.0
    smooth_l1_beta: float = 1.0

    # Optimizer and schedule
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    lr_decay_start: int = 140
    lr_decay_every: int = 20
    lr_decay_factor: float = 0.1
    epochs: int = 200
    batch_size: int = 16
    max_steps: int = 0

    # Augmentation
    augment: bool = True
    aug_rotation: float = math.pi / 4
    aug_scale_min: float = 0.95
    aug_scale_max: float = 1.05
    aug_flip: bool = True

    # Evaluation
    ap_points: int = 11
    eval_metric: str = "both"

    # Data and run control
    dataset_dir: str = ""
    split_file: str = ""
    synthetic_scenes: int = 0
    synthetic_boxes: int = 3
    synthetic_clutter: int = 400
    synthetic_noise: float = 0.02
    seed: int = 0
    num_workers: int = 2
    checkpoint_every: int = 0

    # ------------------------------------------------------------------ presets

    @classmethod
    def for_class(cls, group: str) -> "TrainConfig":
        """Published hyperparameters for the ``car`` or ``pedcyc`` network."""
        if group not in CLASS_GROUPS:
            raise ConfigurationError(f"Unknown class group '{group}' (expected one of {sorted(CLASS_GROUPS)})")
        if group == "car":
            return cls()
        return cls(
            num_voxels=512,
            radius=0.8,
            classes=CLASS_GROUPS["pedcyc"],
            pos_iou_thresh=0.5,
            neg_iou_thresh=0.35,
            nms_iou_thresh=0.6,
        )

    @classmethod
    def desk_preset(cls) -> "TrainConfig":
        """Laptop-sized synthetic run: 20 scenes, 200 steps, batch 2, 80x80 grid."""
        return cls(
            num_voxels=256,
            radius=1.8,
            max_points_per_voxel=16,
            point_mlp_sizes=(16, 32, 32),
            global_mlp_sizes=(16, 32, 32),
            attention_mlp_sizes=(32, 32, 32, 64, 64, 128),
            x_min=0.0,
            x_max=32.0,
            y_min=-16.0,
            y_max=16.0,
            bev_channels=16,
            block_channels=(16, 32, 64),
            branch_channels=32,
            fused_channels=32,
            batch_size=2,
            epochs=20,
            max_steps=200,
            augment=False,
            eval_metric="bev",
            synthetic_scenes=20,
            synthetic_boxes=3,
            synthetic_clutter=300,
        )

    # ------------------------------------------------------------------ derived values

    @property
    def grid_shape(self) -> Tuple[int, int]:
        """(H, W) of the BEV grid: rows along y, columns along x."""
        height = int(math.ceil((self.y_max - self.y_min) / self.grid_resolution - 1e-9))
        width = int(math.ceil((self.x_max - self.x_min) / self.grid_resolution - 1e-9))
        return height, width

    @property
    def extent(self) -> Tuple[float, float, float, float]:
        return (self.x_min, self.x_max, self.y_min, self.y_max)

    @property
    def eval_metrics(self) -> Tuple[str, ...]:
        """AP metrics reported by evaluation runs."""
        return ("bev", "3d") if self.eval_metric == "both" else (self.eval_metric,)

    def attention_layer_sizes(self) -> List[Tuple[int, int]]:
        """
        Per-layer (hidden, out) widths of the attention MLPs for ``num_attention_layers``.

        The last layers of the configured sequence are used; deeper stacks are padded in front
        with copies of the first pair.
        """
        flat = self.attention_mlp_sizes
        pairs = [(int(flat[i]), int(flat[i + 1])) for i in range(0, len(flat), 2)]
        n_layers = self.num_attention_layers
        if n_layers <= len(pairs):
            return pairs[len(pairs) - n_layers:]
        return [pairs[0]] * (n_layers - len(pairs)) + pairs

    # ------------------------------------------------------------------ validation

    def validate(self) -> "TrainConfig":
        """Check cross-field constraints; raises ConfigurationError on the first violation."""
        if self.num_voxels < 1:
            raise ConfigurationError("num_voxels must be >= 1")
        if self.radius <= 0:
            raise ConfigurationError("radius must be > 0")
        if self.max_points_per_voxel < 1:
            raise ConfigurationError("max_points_per_voxel must be >= 1")
        if self.num_attention_layers < 1:
            raise ConfigurationError("num_attention_layers must be >= 1")
        if not self.attention_mlp_sizes or len(self.attention_mlp_sizes) % 2:
            raise ConfigurationError("attention_mlp_sizes must hold (hidden, out) pairs")
        if not self.point_mlp_sizes or not self.global_mlp_sizes:
            raise ConfigurationError("point_mlp_sizes and global_mlp_sizes must be non-empty")
        if self.knn_k < 1:
            raise ConfigurationError("knn_k must be >= 1")
        if self.num_voxels < self.knn_k + 1:
            raise ConfigurationError(f"num_voxels must be at least knn_k + 1 = {self.knn_k + 1}")
        if self.gate_mode not in ("voxel", "layer"):
            raise ConfigurationError(f"gate_mode must be 'voxel' or 'layer', got '{self.gate_mode}'")
        if self.head_variant not in ("sdr", "dr", "sr"):
            raise ConfigurationError(f"head_variant must be sdr, dr or sr, got '{self.head_variant}'")
        if self.nms_iou_kind not in ("bev", "3d"):
            raise ConfigurationError(f"nms_iou_kind must be 'bev' or '3d', got '{self.nms_iou_kind}'")
        if self.eval_metric not in ("bev", "3d", "both"):
            raise ConfigurationError(f"eval_metric must be 'bev', '3d' or 'both', got '{self.eval_metric}'")
        if self.ap_points not in (11, 40):
            raise ConfigurationError("ap_points must be 11 or 40")
        if not 0.0 <= self.neg_iou_thresh < self.pos_iou_thresh <= 1.0:
            raise ConfigurationError("thresholds must satisfy 0 <= neg_iou_thresh < pos_iou_thresh <= 1")
        if self.grid_resolution <= 0 or self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise ConfigurationError("BEV grid has zero area")
        height, width = self.grid_shape
        if height % 8 or width % 8:
            raise ConfigurationError(f"BEV grid {height}x{width} must be divisible by 8 in both extents")
        if len(self.block_channels) != 3:
            raise ConfigurationError("block_channels must list three widths")
        if self.convs_per_block < 1 or self.branch_convs < 1:
            raise ConfigurationError("convs_per_block and branch_convs must be >= 1")
        if not self.classes:
            raise ConfigurationError("classes must be non-empty")
        if not self.anchor_headings:
            raise ConfigurationError("anchor_headings must be non-empty")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if not 0 < self.aug_scale_min <= self.aug_scale_max:
            raise ConfigurationError("augmentation scale range is invalid")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in _config_fields()}


def _config_fields() -> List[dataclasses.Field]:
    return [f for f in dataclasses.fields(TrainConfig) if not f.name.startswith("_")]


def _parse_value(key: str, raw: Any, type_hint: Any) -> Any:
    """Coerce a raw text (or JSON) value to the field's declared type."""
    try:
        if type_hint is bool:
            if isinstance(raw, bool):
                return raw
            word = str(raw).strip().lower()
            if word in _TRUE_WORDS:
                return True
            if word in _FALSE_WORDS:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if type_hint is int:
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(f"not an integer: {raw!r}")
            return int(str(raw).strip()) if not isinstance(raw, (int, float)) else int(raw)
        if type_hint is float:
            return float(raw)
        if type_hint is str:
            return str(raw).strip()
        item_type = getattr(type_hint, "__args__", (str,))[0]
        items = raw if isinstance(raw, (list, tuple)) else [part for part in str(raw).split(",") if part.strip()]
        return tuple(_parse_value(key, item, item_type) for item in items)
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"Invalid value for '{key}': {e}") from e


def _apply_values(values: Dict[str, Any], source: str) -> TrainConfig:
    hints = get_type_hints(TrainConfig)
    known = {f.name for f in _config_fields()}
    base = TrainConfig()
    preset = values.pop("preset", None)
    if preset is not None:
        preset = str(preset).strip()
        base = TrainConfig.desk_preset() if preset == "desk" else TrainConfig.for_class(preset)

    updates = {}
    for key, raw in values.items():
        if key not in known:
            raise ConfigurationError(f"Unknown configuration key '{key}' in {source}")
        updates[key] = _parse_value(key, raw, hints[key])
    return dataclasses.replace(base, **updates)


def parse_config_text(text: str, source: str = "<text>") -> TrainConfig:
    """
    Parse flat ``key = value`` text.

    An optional ``preset = car|pedcyc|desk`` line selects the base values the other keys override.
    """
    values: Dict[str, Any] = {}
    for line_number, raw_line in enumerate(text.splitlines(), start=1):
        stripped = raw_line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"{source}:{line_number}: expected 'key = value', got '{stripped}'")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key in values:
            raise ConfigurationError(f"{source}:{line_number}: duplicate key '{key}'")
        values[key] = value
    return _apply_values(values, source)


def config_from_dict(values: Dict[str, Any], source: str = "<dict>") -> TrainConfig:
    """Build a validated config from a mapping such as checkpoint metadata."""
    return _apply_values(dict(values), source).validate()


def load_config(config_path: Path) -> TrainConfig:
    """Load and validate a configuration file (flat text, or JSON by suffix)."""
    config_path = Path(config_path)
    if config_path.suffix.lower() == ".json":
        data = load_json_with_bom(config_path, exit_on_error=False)
        if not isinstance(data, dict):
            raise ConfigurationError(f"{config_path}: JSON config must be an object")
        config = _apply_values(dict(data), str(config_path))
    else:
        if not config_path.exists():
            raise FileNotFoundError(f"Config file not found: {config_path}")
        config = parse_config_text(config_path.read_text(encoding="utf-8-sig"), str(config_path))
    logger.info(f"Loaded configuration from {config_path}")
    return config.validate()


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format_value(item) for item in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def save_config(config: TrainConfig, config_path: Path) -> Path:
    """Write every field in the flat ``key = value`` format."""
    config_path = ensure_parent_dir(Path(config_path))
    lines = [f"{key} = {_format_value(value)}" for key, value in config.to_dict().items()]
    config_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return config_path
