"""Tests for core file I/O utilities."""

import json
from pathlib import Path
from tempfile import TemporaryDirectory
from typing import Any

import pytest
from pytest import CaptureFixture, MonkeyPatch

from src.core.file_io import ensure_parent_dir, load_json_with_bom, read_id_list, write_id_list

CONFIG_DOC = {"preset": "desk", "num_voxels": 128, "point_mlp_sizes": [16, 32, 32]}


def _deny_read(*args: Any, **kwargs: Any) -> None:
    raise PermissionError("Permission denied")


class TestLoadJsonWithBom:
    """Tests for load_json_with_bom function."""

    @pytest.mark.parametrize("encoding", ["utf-8", "utf-8-sig"])
    def test_config_document(self, encoding: str):
        """The same document decodes with and without a byte order mark."""
        with TemporaryDirectory() as td:
            json_path = Path(td) / "desk.json"
            json_path.write_text(json.dumps(CONFIG_DOC), encoding=encoding)
            assert load_json_with_bom(json_path, exit_on_error=False) == CONFIG_DOC

    def test_list_document(self):
        with TemporaryDirectory() as td:
            json_path = Path(td) / "scenes.json"
            json_path.write_text('["000000", "000001"]', encoding="utf-8")
            assert load_json_with_bom(json_path) == ["000000", "000001"]

    def test_missing_file_raises(self):
        with TemporaryDirectory() as td:
            with pytest.raises(FileNotFoundError):
                load_json_with_bom(Path(td) / "missing.json", exit_on_error=False)

    def test_invalid_json_raises(self):
        with TemporaryDirectory() as td:
            json_path = Path(td) / "broken.json"
            json_path.write_text('{"num_voxels": ', encoding="utf-8")
            with pytest.raises(json.JSONDecodeError):
                load_json_with_bom(json_path, exit_on_error=False)

    def test_unreadable_file_raises(self, monkeypatch: MonkeyPatch):
        with TemporaryDirectory() as td:
            json_path = Path(td) / "locked.json"
            json_path.write_text("{}", encoding="utf-8")
            monkeypatch.setattr(Path, "read_text", _deny_read)
            with pytest.raises(PermissionError):
                load_json_with_bom(json_path, exit_on_error=False)

    @pytest.mark.parametrize(
        "name, content, message",
        [
            ("missing.json", None, "ERROR: Input file not found"),
            ("broken.json", "not valid json {{{", "ERROR: Invalid JSON"),
        ],
    )
    def test_exit_on_error(self, name: str, content: Any, message: str, capsys: CaptureFixture[str]):
        """Script entry points get one ERROR line on stderr and exit status 1."""
        with TemporaryDirectory() as td:
            json_path = Path(td) / name
            if content is not None:
                json_path.write_text(content, encoding="utf-8")
            with pytest.raises(SystemExit) as excinfo:
                load_json_with_bom(json_path)
        assert excinfo.value.code == 1
        assert message in capsys.readouterr().err

    def test_unreadable_file_exits(self, monkeypatch: MonkeyPatch, capsys: CaptureFixture[str]):
        with TemporaryDirectory() as td:
            json_path = Path(td) / "locked.json"
            json_path.write_text("{}", encoding="utf-8")
            monkeypatch.setattr(Path, "read_text", _deny_read)
            with pytest.raises(SystemExit):
                load_json_with_bom(json_path)
        assert "ERROR: Cannot read" in capsys.readouterr().err


class TestEnsureParentDir:
    """Tests for ensure_parent_dir function."""

    def test_creates_nested_parents(self):
        with TemporaryDirectory() as td:
            file_path = Path(td) / "run" / "logs" / "svga.log"
            ensure_parent_dir(file_path)
            assert file_path.parent.is_dir()
            assert not file_path.exists()

    def test_existing_parent(self):
        with TemporaryDirectory() as td:
            assert ensure_parent_dir(Path(td) / "model.ckpt").parent.is_dir()

    def test_returns_path_for_chaining(self):
        """The given path is returned so writes can be chained."""
        with TemporaryDirectory() as td:
            file_path = Path(td) / "run" / "metrics.tsv"
            assert ensure_parent_dir(str(file_path)) == file_path


class TestIdLists:
    """Tests for read_id_list and write_id_list."""

    def test_round_trip(self):
        """Identifiers come back in file order."""
        with TemporaryDirectory() as td:
            list_path = Path(td) / "ImageSets" / "val.txt"
            written = write_id_list(list_path, ["000003", "000001", "000002"])

            assert written == list_path
            assert list_path.read_text(encoding="utf-8") == "000003\n000001\n000002\n"
            assert read_id_list(list_path) == ["000003", "000001", "000002"]

    def test_skips_blank_lines_and_comments(self):
        """Whitespace is stripped; blank lines and # comments are ignored."""
        with TemporaryDirectory() as td:
            list_path = Path(td) / "train.txt"
            list_path.write_text("# training scenes\n  000007 \n\n000008\r\n", encoding="utf-8-sig")

            assert read_id_list(list_path) == ["000007", "000008"]

    def test_empty_list(self):
        with TemporaryDirectory() as td:
            list_path = write_id_list(Path(td) / "empty.txt", [])
            assert read_id_list(list_path) == []

    def test_missing_list(self):
        with TemporaryDirectory() as td:
            with pytest.raises(FileNotFoundError):
                read_id_list(Path(td) / "missing.txt")


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
