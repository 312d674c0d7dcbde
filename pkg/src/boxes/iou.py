"""
Rotated-box overlap.

BEV footprints are clipped against each other with Sutherland-Hodgman and measured with the
shoelace formula; 3D IoU multiplies the BEV intersection by the vertical overlap.
"""

from __future__ import annotations

from typing import List, Sequence, Tuple, Union

import numpy as np

from src.boxes.box import Box7

BoxLike = Union[Box7, Sequence[float], np.ndarray]

_AREA_EPS = 1e-12


def _as_row(box: BoxLike) -> np.ndarray:
    if isinstance(box, Box7):
        return box.to_array()
    return np.asarray(box, dtype=np.float64).reshape(7)


def box_corners_bev(boxes: np.ndarray) -> np.ndarray:
    """
    Footprint corners of [M x 7] boxes, counter-clockwise.

    Returns:
        [M x 4 x 2] array; corner order is front-left, rear-left, rear-right, front-right
    """
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 7)
    half_l = boxes[:, 3:4] / 2.0
    half_w = boxes[:, 4:5] / 2.0
    local_x = np.concatenate([half_l, -half_l, -half_l, half_l], axis=1)
    local_y = np.concatenate([half_w, half_w, -half_w, -half_w], axis=1)
    cos_t = np.cos(boxes[:, 6:7])
    sin_t = np.sin(boxes[:, 6:7])
    x = boxes[:, 0:1] + local_x * cos_t - local_y * sin_t
    y = boxes[:, 1:2] + local_x * sin_t + local_y * cos_t
    return np.stack([x, y], axis=2)


def polygon_area(polygon: np.ndarray) -> float:
    """Signed shoelace area; positive for counter-clockwise vertices."""
    if len(polygon) < 3:
        return 0.0
    x, y = polygon[:, 0], polygon[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _cross(edge_start: np.ndarray, edge_end: np.ndarray, point: np.ndarray) -> float:
    return float(
        (edge_end[0] - edge_start[0]) * (point[1] - edge_start[1])
        - (edge_end[1] - edge_start[1]) * (point[0] - edge_start[0])
    )


def clip_polygon(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """
    Sutherland-Hodgman clipping of ``subject`` by the convex counter-clockwise polygon ``clip``.

    Returns:
        vertices of the intersection polygon (possibly empty)
    """
    output: List[np.ndarray] = list(subject)
    n_clip = len(clip)
    for i in range(n_clip):
        if not output:
            break
        a, b = clip[i], clip[(i + 1) % n_clip]
        vertices = output
        output = []
        prev = vertices[-1]
        prev_side = _cross(a, b, prev)
        for current in vertices:
            side = _cross(a, b, current)
            if side >= 0:
                if prev_side < 0:
                    output.append(prev + (current - prev) * (prev_side / (prev_side - side)))
                output.append(current)
            elif prev_side >= 0:
                output.append(prev + (current - prev) * (prev_side / (prev_side - side)))
            prev, prev_side = current, side
    return np.array(output, dtype=np.float64).reshape(-1, 2)


def _canonical(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    # Fixed argument order makes the floating-point result independent of call order.
    if tuple(a) > tuple(b):
        return b, a
    return a, b


def intersection_area_bev(a: BoxLike, b: BoxLike) -> float:
    a_row, b_row = _canonical(_as_row(a), _as_row(b))
    corners = box_corners_bev(np.stack([a_row, b_row]))
    return max(polygon_area(clip_polygon(corners[0], corners[1])), 0.0)


def iou_bev(a: BoxLike, b: BoxLike) -> float:
    """Bird's-eye-view IoU of two oriented boxes, in [0, 1]; zero-area footprints give 0."""
    a_row, b_row = _canonical(_as_row(a), _as_row(b))
    area_a = a_row[3] * a_row[4]
    area_b = b_row[3] * b_row[4]
    if area_a <= _AREA_EPS or area_b <= _AREA_EPS:
        return 0.0
    inter = intersection_area_bev(a_row, b_row)
    union = area_a + area_b - inter
    return float(np.clip(inter / union, 0.0, 1.0)) if union > _AREA_EPS else 0.0


def vertical_overlap(a: BoxLike, b: BoxLike) -> float:
    a_row, b_row = _as_row(a), _as_row(b)
    top = min(a_row[2] + a_row[5] / 2.0, b_row[2] + b_row[5] / 2.0)
    bottom = max(a_row[2] - a_row[5] / 2.0, b_row[2] - b_row[5] / 2.0)
    return max(0.0, top - bottom)


def iou_3d(a: BoxLike, b: BoxLike) -> float:
    """Volumetric IoU: BEV intersection times vertical overlap over the union of volumes."""
    a_row, b_row = _canonical(_as_row(a), _as_row(b))
    vol_a = a_row[3] * a_row[4] * a_row[5]
    vol_b = b_row[3] * b_row[4] * b_row[5]
    if vol_a <= _AREA_EPS or vol_b <= _AREA_EPS:
        return 0.0
    overlap = vertical_overlap(a_row, b_row)
    if overlap <= 0.0:
        return 0.0
    inter = intersection_area_bev(a_row, b_row) * overlap
    union = vol_a + vol_b - inter
    return float(np.clip(inter / union, 0.0, 1.0)) if union > _AREA_EPS else 0.0


def _candidate_pairs(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairs whose circumscribed BEV circles touch; all other pairs have zero overlap."""
    radius_a = 0.5 * np.hypot(a[:, 3], a[:, 4])
    radius_b = 0.5 * np.hypot(b[:, 3], b[:, 4])
    dist = np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])
    return np.argwhere(dist < radius_a[:, None] + radius_b[None, :])


def iou_bev_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise BEV IoU between [M x 7] and [K x 7] boxes."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 7)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 7)
    out = np.zeros((len(a), len(b)))
    for i, j in _candidate_pairs(a, b):
        out[i, j] = iou_bev(a[i], b[j])
    return out


def iou_3d_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise 3D IoU between [M x 7] and [K x 7] boxes."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 7)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 7)
    out = np.zeros((len(a), len(b)))
    for i, j in _candidate_pairs(a, b):
        out[i, j] = iou_3d(a[i], b[j])
    return out


def points_in_box(points: np.ndarray, box: BoxLike) -> np.ndarray:
    """Boolean mask of rows of ``points`` (x, y, z, ...) lying inside ``box`` (boundary inclusive)."""
    row = _as_row(box)
    points = np.asarray(points, dtype=np.float64)
    dx = points[:, 0] - row[0]
    dy = points[:, 1] - row[1]
    cos_t, sin_t = np.cos(row[6]), np.sin(row[6])
    local_x = dx * cos_t + dy * sin_t
    local_y = -dx * sin_t + dy * cos_t
    tol = 1e-9
    return (
        (np.abs(local_x) <= row[3] / 2.0 + tol)
        & (np.abs(local_y) <= row[4] / 2.0 + tol)
        & (np.abs(points[:, 2] - row[2]) <= row[5] / 2.0 + tol)
    )
