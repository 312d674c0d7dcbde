"""
Residual encoding between boxes and anchors.

    dx = (x_gt - x_a) / d_a     dy = (y_gt - y_a) / d_a     dz = (z_gt - z_a) / h_a
    dw = log(w_gt / w_a)        dl = log(l_gt / l_a)        dh = log(h_gt / h_a)
    dtheta = sin(theta_gt - theta_a)                          d_a = sqrt(w_a^2 + l_a^2)

Decoding inverts this exactly while |theta_gt - theta_a| <= pi/2; the sine makes the heading
ambiguous modulo pi outside that range.
"""

from __future__ import annotations

import logging
from typing import Tuple

import numpy as np

from src.boxes.box import Box7, Residual7, normalize_angle

logger = logging.getLogger(__name__)

# Bound on decoded log-size residuals; keeps exp() finite for untrained predictions.
MAX_LOG_RATIO = 10.0


def encode_boxes(gt: np.ndarray, anchors: np.ndarray) -> np.ndarray:
    """Vectorized encoding of [M x 7] boxes against [M x 7] anchors (columns x y z l w h theta)."""
    gt = np.asarray(gt, dtype=np.float64).reshape(-1, 7)
    anchors = np.asarray(anchors, dtype=np.float64).reshape(-1, 7)
    x_a, y_a, z_a, l_a, w_a, h_a, t_a = anchors.T
    x_g, y_g, z_g, l_g, w_g, h_g, t_g = gt.T
    d_a = np.sqrt(w_a ** 2 + l_a ** 2)
    return np.stack(
        [
            (x_g - x_a) / d_a,
            (y_g - y_a) / d_a,
            (z_g - z_a) / h_a,
            np.log(w_g / w_a),
            np.log(l_g / l_a),
            np.log(h_g / h_a),
            np.sin(t_g - t_a),
        ],
        axis=1,
    )


def decode_boxes(residuals: np.ndarray, anchors: np.ndarray) -> Tuple[np.ndarray, int]:
    """
    Vectorized inverse of ``encode_boxes``.

    Returns:
        (boxes [M x 7], number of dtheta values clamped into [-1, 1])
    """
    residuals = np.asarray(residuals, dtype=np.float64).reshape(-1, 7)
    anchors = np.asarray(anchors, dtype=np.float64).reshape(-1, 7)
    x_a, y_a, z_a, l_a, w_a, h_a, t_a = anchors.T
    dx, dy, dz, dw, dl, dh, dt = residuals.T
    d_a = np.sqrt(w_a ** 2 + l_a ** 2)
    n_clamped = int(np.count_nonzero(np.abs(dt) > 1.0))
    dt = np.clip(dt, -1.0, 1.0)
    dw, dl, dh = (np.clip(v, -MAX_LOG_RATIO, MAX_LOG_RATIO) for v in (dw, dl, dh))
    boxes = np.stack(
        [
            dx * d_a + x_a,
            dy * d_a + y_a,
            dz * h_a + z_a,
            l_a * np.exp(dl),
            w_a * np.exp(dw),
            h_a * np.exp(dh),
            normalize_angle(t_a + np.arcsin(dt)),
        ],
        axis=1,
    )
    return boxes, n_clamped


class BoxCodec:
    """Encode/decode with a running count of clamped heading residuals."""

    def __init__(self) -> None:
        self.clamp_count = 0

    def encode(self, gt: Box7, anchor: Box7) -> Residual7:
        return Residual7.from_array(encode_boxes(gt.to_array(), anchor.to_array())[0])

    def decode(self, residual: Residual7, anchor: Box7) -> Box7:
        boxes, _ = self.decode_array(residual.to_array(), anchor.to_array())
        return Box7.from_array(boxes[0])

    def decode_array(self, residuals: np.ndarray, anchors: np.ndarray) -> Tuple[np.ndarray, int]:
        boxes, n_clamped = decode_boxes(residuals, anchors)
        if n_clamped:
            self.clamp_count += n_clamped
            logger.warning(f"Clamped {n_clamped} heading residuals outside [-1, 1] (total {self.clamp_count})")
        return boxes, n_clamped


_default_codec = BoxCodec()


def encode(gt: Box7, anchor: Box7) -> Residual7:
    """Residual of ``gt`` relative to ``anchor``."""
    return _default_codec.encode(gt, anchor)


def decode(residual: Residual7, anchor: Box7) -> Box7:
    """Box recovered from ``residual`` applied to ``anchor``; dtheta outside [-1, 1] is clamped."""
    return _default_codec.decode(residual, anchor)
