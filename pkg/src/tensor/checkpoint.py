"""
Parameter checkpoint container.

Layout::

    b"SVGACKPT"                 8-byte magic
    uint32 LE                   format version
    uint32 LE                   header length in bytes
    header (UTF-8 JSON)         {"entries": [{"name", "shape", "offset"}], "metadata": {...}}
    payload                     concatenated little-endian float64 arrays, row-major

Offsets are byte offsets into the payload.
"""

from __future__ import annotations

import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from src.core.errors import DataFormatError
from src.core.file_io import ensure_parent_dir

logger = logging.getLogger(__name__)

MAGIC = b"SVGACKPT"
FORMAT_VERSION = 1
_PREAMBLE = struct.Struct("<8sII")


def save_checkpoint(path: Path, state: Dict[str, np.ndarray], metadata: Optional[Dict[str, Any]] = None) -> Path:
    """Write ``state`` (name -> array) and optional JSON-serializable metadata."""
    path = ensure_parent_dir(Path(path))
    entries = []
    payload = []
    offset = 0
    for name, value in state.items():
        blob = np.ascontiguousarray(value, dtype="<f8").tobytes()
        entries.append({"name": name, "shape": list(np.shape(value)), "offset": offset})
        payload.append(blob)
        offset += len(blob)

    header = json.dumps({"entries": entries, "metadata": metadata or {}}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_PREAMBLE.pack(MAGIC, FORMAT_VERSION, len(header)))
        f.write(header)
        for blob in payload:
            f.write(blob)
    logger.info(f"Checkpoint with {len(entries)} tensors written to {path}")
    return path


def load_checkpoint(path: Path) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """
    Read a checkpoint written by ``save_checkpoint``.

    Raises:
        DataFormatError: bad magic, unsupported version, or truncated payload
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    raw = path.read_bytes()
    if len(raw) < _PREAMBLE.size:
        raise DataFormatError(f"{path}: file too short for a checkpoint header")
    magic, version, header_len = _PREAMBLE.unpack_from(raw)
    if magic != MAGIC:
        raise DataFormatError(f"{path}: not a checkpoint file")
    if version != FORMAT_VERSION:
        raise DataFormatError(f"{path}: unsupported checkpoint format version {version}")

    header_end = _PREAMBLE.size + header_len
    try:
        header = json.loads(raw[_PREAMBLE.size: header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataFormatError(f"{path}: corrupt checkpoint header: {e}") from e

    payload = memoryview(raw)[header_end:]
    state: Dict[str, np.ndarray] = {}
    for entry in header["entries"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + 8 * count
        if end > len(payload):
            raise DataFormatError(f"{path}: payload truncated in '{entry['name']}'")
        state[entry["name"]] = np.frombuffer(payload[start:end], dtype="<f8").astype(np.float64).reshape(shape)
    return state, header.get("metadata", {})
