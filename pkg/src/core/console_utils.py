"""
Console utilities for the SVGA detection toolkit.

Provides consistent console output formatting and one-time logging setup for the CLI.
"""

import logging
from pathlib import Path
from typing import Optional

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def print_header(title: str, width: int = 80, char: str = "=") -> None:
    """
    Print a formatted section header to console.

    Args:
        title: The title text to display
        width: Total width of the header line (default: 80)
        char: Character to use for the border (default: "=")

    Example:
        print_header("Training: car")
        # Outputs:
        # ================================================================================
        #   Training: car
        # ================================================================================
    """
    print(f"\n{char * width}")
    print(f"  {title}")
    print(f"{char * width}\n")


def setup_logging(log_dir: Optional[Path] = None, level: int = logging.INFO, log_name: str = "svga.log") -> Path:
    """
    Configure root logging for a command-line run.

    Args:
        log_dir: Directory receiving the log file (default: output/logs)
        level: Root log level
        log_name: Log file name inside ``log_dir``

    Returns:
        Path of the log file
    """
    log_dir = Path(log_dir) if log_dir is not None else Path("output/logs")
    log_dir.mkdir(parents=True, exist_ok=True)
    log_path = log_dir / log_name

    logging.basicConfig(
        level=level,
        format=LOG_FORMAT,
        handlers=[logging.FileHandler(log_path, encoding="utf-8"), logging.StreamHandler()],
        force=True,
    )
    logging.getLogger(__name__).debug("Logging to %s", log_path)
    return log_path
