"""
Shared report utilities for the SVGA detection toolkit.

Provides Excel export of evaluation tables and loading of the tab-separated training
metrics log.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict

import pandas as pd
from openpyxl.styles import Font, PatternFill
from openpyxl.utils import get_column_letter

from src.core.file_io import ensure_parent_dir

HEADER_FILL = "CCE5FF"
COLUMN_WIDTH = 15

METRICS_COLUMNS = ["step", "cls_loss", "reg_loss", "total", "lr"]


def write_excel_report(sheets: Dict[str, pd.DataFrame], report_path: Path) -> Path:
    """
    Write one sheet per DataFrame with bold, shaded headers.

    Args:
        sheets: sheet name -> table
        report_path: destination ``.xlsx`` path

    Returns:
        The report path
    """
    report_path = ensure_parent_dir(Path(report_path))
    with pd.ExcelWriter(report_path, engine="openpyxl") as writer:
        for name, frame in sheets.items():
            frame.to_excel(writer, sheet_name=name, index=False)
            sheet = writer.sheets[name]
            for column_index in range(1, len(frame.columns) + 1):
                cell = sheet.cell(row=1, column=column_index)
                cell.font = Font(bold=True)
                cell.fill = PatternFill(start_color=HEADER_FILL, end_color=HEADER_FILL, fill_type="solid")
                sheet.column_dimensions[get_column_letter(column_index)].width = COLUMN_WIDTH
    return report_path


def load_metrics_log(log_path: Path) -> pd.DataFrame:
    """
    Read a training metrics log (tab-separated: step, cls_loss, reg_loss, total, lr).

    Raises:
        FileNotFoundError: log missing
        ValueError: columns do not match the metrics layout
    """
    log_path = Path(log_path)
    if not log_path.exists():
        raise FileNotFoundError(f"Metrics log not found: {log_path}")
    frame = pd.read_csv(log_path, sep="\t")
    if list(frame.columns) != METRICS_COLUMNS:
        raise ValueError(f"{log_path}: expected columns {METRICS_COLUMNS}, got {list(frame.columns)}")
    return frame


def summarize_metrics(frame: pd.DataFrame, window: int = 10) -> Dict[str, float]:
    """First/last total loss and the ratio of the last ``window`` mean to the first step."""
    if frame.empty:
        return {"steps": 0}
    first = float(frame["total"].iloc[0])
    last_mean = float(frame["total"].tail(window).mean())
    return {
        "steps": int(frame["step"].iloc[-1]),
        "first_total": first,
        "last_total": float(frame["total"].iloc[-1]),
        "last_window_mean": last_mean,
        "ratio": last_mean / first if first else float("nan"),
    }
