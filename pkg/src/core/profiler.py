"""
Performance profiling utilities for the SVGA detection toolkit.

Usage:
    from src.core.profiler import benchmark_operation, profile_script

    stage = benchmark_operation("feature aggregation", model.bev_features, prepared)
    profile_script(lambda: trainer.fit(), output_file="output/profile.txt")
"""

import cProfile
import io
import logging
import pstats
import time
import tracemalloc
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional

from src.core.file_io import ensure_parent_dir

logger = logging.getLogger(__name__)


@dataclass
class StageTiming:
    """Wall time and peak memory of one benchmarked stage."""

    name: str
    time_seconds: float
    memory_mb: float
    success: bool
    error: Optional[str] = None
    result: Any = None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "time_seconds": self.time_seconds,
            "memory_mb": self.memory_mb,
            "success": self.success,
            "error": self.error,
        }


def benchmark_operation(name: str, func: Callable, *args: Any, **kwargs: Any) -> StageTiming:
    """
    Benchmark a single operation with timing and memory tracking.

    Exceptions raised by ``func`` are captured in the returned record rather than propagated,
    so one failing stage does not hide the timings of the others.

    Returns:
        StageTiming with the stage result attached when it succeeded
    """
    tracemalloc.start()
    start_time = time.perf_counter()

    try:
        result = func(*args, **kwargs)
        success = True
        error = None
    except Exception as e:  # noqa: BLE001
        logger.error(f"Benchmark stage '{name}' failed: {e}")
        result = None
        success = False
        error = str(e)

    elapsed = time.perf_counter() - start_time
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()

    return StageTiming(
        name=name,
        time_seconds=elapsed,
        memory_mb=peak / (1024 * 1024),
        success=success,
        error=error,
        result=result,
    )


def profile_script(func: Callable, output_file: Optional[str] = None, top: int = 20) -> None:
    """
    Profile a callable with cProfile and print the top entries by cumulative time.

    Args:
        func: Function to profile
        output_file: Optional path to save the full profile stats
        top: Number of rows printed to the console
    """
    profiler = cProfile.Profile()
    profiler.enable()

    try:
        func()
    finally:
        profiler.disable()

        stream = io.StringIO()
        stats = pstats.Stats(profiler, stream=stream)
        stats.sort_stats("cumulative")
        stats.print_stats(top)
        print(stream.getvalue())

        if output_file:
            output_path = Path(output_file)
            ensure_parent_dir(output_path)
            with open(output_path, "w", encoding="utf-8") as f:
                stats = pstats.Stats(profiler, stream=f)
                stats.sort_stats("cumulative")
                stats.print_stats()
            print(f"📊 Profile saved to {output_path}")
