"""
Exception hierarchy for the SVGA detection toolkit.

Every error raised on purpose by the toolkit derives from ``SvgaError`` and from the
builtin exception a caller would naturally expect, so both ``except SvgaError`` and
``except ValueError`` keep working.
"""

from __future__ import annotations

from typing import Optional


class SvgaError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(SvgaError, ValueError):
    """Tensor or layer shapes do not compose."""

    def __init__(self, message: str, layer_index: Optional[int] = None):
        if layer_index is not None:
            message = f"layer {layer_index}: {message}"
        super().__init__(message)
        self.layer_index = layer_index


class NonFiniteError(SvgaError, FloatingPointError):
    """A forward operation produced NaN or Inf."""


class GradientError(SvgaError, RuntimeError):
    """Misuse of the gradient tape or a non-finite gradient."""


class ConfigurationError(SvgaError, ValueError):
    """Invalid or unknown configuration value."""


class DataFormatError(SvgaError, ValueError):
    """On-disk data does not follow the expected format."""


class TruncatedFileError(DataFormatError):
    """Binary file length is not a whole number of records."""

    def __init__(self, message: str, n_bytes: int):
        super().__init__(message)
        self.n_bytes = n_bytes


class RecordError(DataFormatError):
    """A single binary record holds an invalid value."""

    def __init__(self, message: str, record_index: int):
        super().__init__(f"record {record_index}: {message}")
        self.record_index = record_index


class LabelParseError(DataFormatError):
    """A label text line could not be parsed."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class GeometryError(SvgaError, ValueError):
    """Invalid request to a geometric kernel (sample size, neighbor count, ...)."""


class TrainingDivergedError(SvgaError, RuntimeError):
    """Loss became non-finite during training."""

    def __init__(self, message: str, scene_id: str):
        super().__init__(f"scene {scene_id}: {message}")
        self.scene_id = scene_id
