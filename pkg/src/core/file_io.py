"""
File helpers shared by the configuration, dataset and report code.

- JSON configuration files, tolerating a UTF-8 BOM
- Split files with one scene id per line
- Parent-directory creation for every writer
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Any, Iterable, List, NoReturn


def _fail(message: str, error: Exception, exit_on_error: bool) -> NoReturn:
    if exit_on_error:
        print(f"ERROR: {message}", file=sys.stderr)
        sys.exit(1)
    raise error


def load_json_with_bom(json_path: Path, exit_on_error: bool = True) -> Any:
    """
    Parse a JSON file written with or without a UTF-8 byte order mark.

    Args:
        json_path: JSON file, e.g. a configuration exported by another tool
        exit_on_error: Print ``ERROR: ...`` to stderr and exit with status 1 instead of raising

    Returns:
        The decoded document

    Raises:
        FileNotFoundError, json.JSONDecodeError, PermissionError, UnicodeDecodeError:
            when ``exit_on_error`` is False
    """
    json_path = Path(json_path)
    if not json_path.exists():
        message = f"Input file not found: {json_path}"
        _fail(message, FileNotFoundError(message), exit_on_error)
    try:
        text = json_path.read_text(encoding="utf-8-sig")
    except (PermissionError, UnicodeDecodeError) as e:
        _fail(f"Cannot read {json_path}: {e}", e, exit_on_error)
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        _fail(f"Invalid JSON in {json_path}: {e}", e, exit_on_error)


def read_id_list(list_path: Path) -> List[str]:
    """
    Read a list file with one identifier per line.

    Blank lines and ``#`` comments are skipped; surrounding whitespace is stripped.

    Args:
        list_path: Path to the list file

    Returns:
        Identifiers in file order
    """
    list_path = Path(list_path)
    if not list_path.exists():
        raise FileNotFoundError(f"List file not found: {list_path}")

    ids = []
    for raw_line in list_path.read_text(encoding="utf-8-sig").splitlines():
        stripped = raw_line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        ids.append(stripped)
    return ids


def write_id_list(list_path: Path, ids: Iterable[str]) -> Path:
    """Write identifiers one per line, creating parent directories."""
    list_path = ensure_parent_dir(list_path)
    list_path.write_text("".join(f"{scene_id}\n" for scene_id in ids), encoding="utf-8")
    return list_path


def ensure_parent_dir(path: Path) -> Path:
    """
    Ensure the parent directory of a path exists.

    Args:
        path: File path whose parent directory should exist

    Returns:
        The original path (for method chaining)
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path
