"""7-DOF oriented boxes and box-to-anchor residual records."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from src.core.errors import GeometryError

BOX_FIELDS = ("x", "y", "z", "l", "w", "h", "theta")
RESIDUAL_FIELDS = ("dx", "dy", "dz", "dw", "dl", "dh", "dtheta")


def normalize_angle(theta: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Wrap angles into (-pi, pi]."""
    wrapped = np.mod(np.asarray(theta, dtype=np.float64) + np.pi, 2.0 * np.pi) - np.pi
    wrapped = np.where(wrapped <= -np.pi, wrapped + 2.0 * np.pi, wrapped)
    return float(wrapped) if np.ndim(wrapped) == 0 else wrapped


@dataclass(frozen=True)
class Box7:
    """
    Oriented 3D box in the LIDAR frame.

    (x, y, z) is the geometric center, l runs along the heading, w across it, h is vertical.
    theta is the heading about +z, normalized to (-pi, pi].
    """

    x: float
    y: float
    z: float
    l: float  # noqa: E741
    w: float
    h: float
    theta: float

    def __post_init__(self) -> None:
        values = (self.x, self.y, self.z, self.l, self.w, self.h, self.theta)
        if not all(math.isfinite(v) for v in values):
            raise GeometryError(f"box fields must be finite: {values}")
        if self.l <= 0 or self.w <= 0 or self.h <= 0:
            raise GeometryError(f"box extents must be positive, got l={self.l} w={self.w} h={self.h}")
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    @classmethod
    def from_array(cls, values: Iterable[float]) -> "Box7":
        return cls(*(float(v) for v in values))

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.l, self.w, self.h, self.theta], dtype=np.float64)

    @property
    def bottom(self) -> float:
        return self.z - self.h / 2.0

    @property
    def top(self) -> float:
        return self.z + self.h / 2.0

    @property
    def volume(self) -> float:
        return self.l * self.w * self.h


@dataclass(frozen=True)
class Residual7:
    """Regression target between a box and an anchor; dtheta is a sine and lies in [-1, 1]."""

    dx: float
    dy: float
    dz: float
    dw: float
    dl: float
    dh: float
    dtheta: float

    @classmethod
    def from_array(cls, values: Iterable[float]) -> "Residual7":
        return cls(*(float(v) for v in values))

    def to_array(self) -> np.ndarray:
        return np.array([self.dx, self.dy, self.dz, self.dw, self.dl, self.dh, self.dtheta], dtype=np.float64)


def boxes_to_array(boxes: Iterable[Box7]) -> np.ndarray:
    rows = [box.to_array() for box in boxes]
    return np.stack(rows) if rows else np.zeros((0, 7))
