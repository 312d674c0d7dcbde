"""
KITTI label text files.

Each line: ``type truncated occluded alpha x1 y1 x2 y2 h w l x y z rotation_y [score]``,
with 3D fields in the rectified camera frame. Detections carry the 16th score column.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

from src.core.errors import GeometryError, LabelParseError
from src.core.file_io import ensure_parent_dir
from src.kitti.calibration import Calibration
from src.kitti.types import Detection, LabeledBox, ObjectClass

logger = logging.getLogger(__name__)

LABEL_FIELDS = 15
DETECTION_FIELDS = 16


def parse_label_line(line: str, line_number: int, calibration: Optional[Calibration] = None) -> LabeledBox:
    """
    Parse one label or detection line into a LIDAR-frame record.

    Raises:
        LabelParseError: wrong field count, non-numeric value, or invalid box extents
    """
    calibration = calibration or Calibration.default()
    parts = line.split()
    if len(parts) not in (LABEL_FIELDS, DETECTION_FIELDS):
        raise LabelParseError(f"expected {LABEL_FIELDS} or {DETECTION_FIELDS} fields, got {len(parts)}", line_number)
    type_name = parts[0]
    try:
        truncation = float(parts[1])
        occlusion = int(float(parts[2]))
        alpha = float(parts[3])
        bbox_2d = tuple(float(v) for v in parts[4:8])
        h, w, l, x, y, z, ry = (float(v) for v in parts[8:15])  # noqa: E741
        score = float(parts[15]) if len(parts) == DETECTION_FIELDS else None
    except ValueError as e:
        raise LabelParseError(f"non-numeric field: {e}", line_number) from e

    object_class = ObjectClass.from_type_name(type_name)
    common = dict(
        object_class=object_class,
        type_name=type_name,
        truncation=truncation,
        occlusion=occlusion,
        alpha=alpha,
        bbox_2d=bbox_2d,
    )
    if object_class is ObjectClass.DONT_CARE:
        record = LabeledBox(box=None, raw_3d=(h, w, l, x, y, z, ry), **common)
    else:
        try:
            box = calibration.box_from_camera(h, w, l, x, y, z, ry)
        except GeometryError as e:
            raise LabelParseError(str(e), line_number) from e
        record = LabeledBox(box=box, **common)

    if score is None:
        return record
    return Detection(**{**vars(record), "score": score})


def load_labels(path: Path, calibration: Optional[Calibration] = None) -> List[LabeledBox]:
    """
    Read a KITTI label file; DontCare and non-detection types are kept with ``is_dont_care`` set.

    Raises:
        FileNotFoundError: path missing
        LabelParseError: malformed line (1-based line number attached)
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Label file not found: {path}")
    labels = []
    for line_number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            labels.append(parse_label_line(line, line_number, calibration))
        except LabelParseError as e:
            logger.error(f"{path}: {e}")
            raise
    return labels


def format_label_line(label: LabeledBox, calibration: Optional[Calibration] = None) -> str:
    calibration = calibration or Calibration.default()
    if label.box is None:
        fields_3d = label.raw_3d or (-1.0, -1.0, -1.0, -1000.0, -1000.0, -1000.0, -10.0)
    else:
        fields_3d = calibration.box_to_camera(label.box)
    parts = [
        label.type_name,
        f"{label.truncation:.2f}",
        str(int(label.occlusion)),
        f"{label.alpha:.8f}",
        *(f"{v:.2f}" for v in label.bbox_2d),
        *(f"{v:.8f}" for v in fields_3d),
    ]
    if isinstance(label, Detection):
        parts.append(f"{label.score:.8f}")
    return " ".join(parts)


def save_labels(path: Path, labels: Iterable[LabeledBox], calibration: Optional[Calibration] = None) -> Path:
    """Write records in file order, one line each."""
    path = ensure_parent_dir(Path(path))
    lines = [format_label_line(label, calibration) for label in labels]
    path.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")
    return path


def save_detections(
    out_dir: Path, scene_id: str, detections: Sequence[Detection], calibration: Optional[Calibration] = None
) -> Path:
    """
    Write ``<out_dir>/<scene_id>.txt`` with one line per detection, highest score first.

    Equal scores keep their input order. An empty detection list yields an empty file.
    """
    ordered = sorted(detections, key=lambda det: -det.score)
    path = save_labels(Path(out_dir) / f"{scene_id}.txt", ordered, calibration)
    logger.debug(f"Wrote {len(ordered)} detections to {path}")
    return path
