"""
JSON and CSV serialisation of gap reports

Both writers are byte-deterministic for a given report: fixed key order,
fixed float formatting and no timestamps.
"""

import csv
import logging
import os
from pathlib import Path
from typing import List, Optional, Union

from app.schemas.campaign import CellResult, GapReport

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["check", "dim", "p", "kind", "trials", "min_gap", "normalized_min_gap", "failures"]

PathLike = Union[str, os.PathLike]


def _format_float(value: Optional[float]) -> str:
    if value is None:
        return ""
    return f"{value:.12e}"


def _format_p(p: float) -> str:
    return f"{p:g}"


def csv_row(cell: CellResult) -> List[str]:
    return [
        cell.check,
        str(cell.dim),
        _format_p(cell.p),
        cell.kind,
        str(cell.trials),
        _format_float(cell.min_gap),
        _format_float(cell.normalized_min_gap),
        str(len(cell.failures)),
    ]


def _prepare(path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_json(report: GapReport, path: PathLike) -> Path:
    """Dump the full report, failures and reproducers included"""
    path = _prepare(path)
    with path.open("w", encoding="utf-8", newline="\n") as f:
        f.write(report.model_dump_json(indent=2))
        f.write("\n")
    logger.info("Wrote JSON report with %d cells to %s", len(report.cells), path)
    return path


def write_csv(report: GapReport, path: PathLike) -> Path:
    """
    Per-cell summary table.
    Columns:
        check, dim, p, kind, trials, min_gap, normalized_min_gap, failures
    """
    path = _prepare(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for cell in report.cells:
            w.writerow(csv_row(cell))
    logger.info("Wrote CSV table with %d rows to %s", len(report.cells), path)
    return path


def write_report(report: GapReport, path: PathLike, fmt: str = "json") -> Path:
    if fmt == "json":
        return write_json(report, path)
    if fmt == "csv":
        return write_csv(report, path)
    raise ValueError(f"Unknown report format: {fmt}")


def console_summary(report: GapReport, worst: int = 5, max_failures: int = 10) -> str:
    """Human summary: counts, worst normalized gaps and failure reproducers"""
    trials = sum(cell.trials for cell in report.cells)
    lines = [
        f"{report.project} {report.version}  seed={report.config.seed}",
        f"cells: {len(report.cells)}  trials: {trials}  failures: {report.failure_count}",
    ]
    ranked = report.worst_cells(worst)
    if ranked:
        lines.append("worst normalized gaps:")
        for cell in ranked:
            lines.append(
                f"  {cell.check:<18} dim={cell.dim:<3} p={_format_p(cell.p):<5} kind={cell.kind:<14} "
                f"{cell.normalized_min_gap: .3e}"
            )
    failures = report.failures
    if failures:
        lines.append("failures (reproduce with seed/stream):")
        for failure in failures[:max_failures]:
            lines.append(
                f"  {failure.check} seed={failure.seed} stream={failure.stream} dim={failure.dim} "
                f"p={_format_p(failure.p)} kind={failure.kind} trial={failure.trial}: {failure.message}"
            )
        if len(failures) > max_failures:
            lines.append(f"  ... {len(failures) - max_failures} more in the report")
    lines.append("PASS" if report.ok else "FAIL")
    return "\n".join(lines)
