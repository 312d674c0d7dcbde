"""
Tests for the performance profiling utilities.
"""

import time
from pathlib import Path
from tempfile import TemporaryDirectory

import pytest

from src.core.profiler import StageTiming, benchmark_operation, profile_script


class TestBenchmarkOperation:
    """Tests for benchmark_operation."""

    def test_records_time_memory_and_result(self):
        """A successful stage carries its result, a positive time and the peak allocation."""

        def allocate(n: int) -> list:
            time.sleep(0.01)
            return [0.0] * n

        timing = benchmark_operation("allocate", allocate, 200_000)

        assert isinstance(timing, StageTiming)
        assert timing.success
        assert timing.error is None
        assert len(timing.result) == 200_000
        assert timing.time_seconds >= 0.01
        assert timing.memory_mb > 1.0

    def test_failure_is_captured(self, caplog):
        """Exceptions do not propagate; they are logged and recorded."""

        def broken():
            raise RuntimeError("no scenes")

        timing = benchmark_operation("broken stage", broken)

        assert not timing.success
        assert timing.error == "no scenes"
        assert timing.result is None
        assert "Benchmark stage 'broken stage' failed" in caplog.text

    def test_to_dict_drops_result(self):
        timing = benchmark_operation("sum", sum, [1, 2, 3])
        assert timing.result == 6
        assert set(timing.to_dict()) == {"name", "time_seconds", "memory_mb", "success", "error"}


class TestProfileScript:
    """Tests for profile_script."""

    def test_profile_script_prints_to_console(self, capsys):
        """Test that profile_script prints cProfile stats to the console."""

        def script_to_profile():
            sum(i for i in range(1000))

        profile_script(script_to_profile)
        captured = capsys.readouterr()

        assert "ncalls" in captured.out
        assert "tottime" in captured.out
        assert "cumtime" in captured.out
        assert "script_to_profile" in captured.out

    def test_profile_script_saves_to_file(self):
        """Test that profile_script saves detailed stats to a file."""
        with TemporaryDirectory() as td:
            output_file = Path(td) / "nested" / "profile_stats.txt"

            def script_to_profile():
                time.sleep(0.01)

            profile_script(script_to_profile, output_file=str(output_file))

            assert output_file.exists()
            content = output_file.read_text()
            assert "ncalls" in content
            assert "tottime" in content
            assert "script_to_profile" in content

    def test_profile_script_reraises(self, capsys):
        """Stats are still printed when the profiled callable fails."""

        def failing():
            raise ValueError("bad scene")

        with pytest.raises(ValueError):
            profile_script(failing)
        assert "failing" in capsys.readouterr().out


if __name__ == "__main__":
    pytest.main()
