# src/reservebench/report.py
"""
Study report files.

    summary.json   full StudyReport (round-trips through load_report)
    scores.csv     method, scenario, observed, crps, energy, pit, msep terms, failure
    pit.csv        method, bin_left, bin_right, count
    ppcurve.csv    method, p, fraction
    coverage.csv   method, level, coverage, avg_width

Rows follow the report's method order, then scenario / bin / grid order.
"""

from __future__ import annotations

import csv
import json
import logging
from collections.abc import Iterator
from pathlib import Path
from typing import Any, TextIO

import ijson
import numpy as np
from typing_extensions import Self

from .errors import ReportIOError
from .harness import MethodSummary, ScenarioRecord, StudyReport

logger = logging.getLogger(__name__)

SUMMARY = "summary.json"
SCORES = "scores.csv"
PIT = "pit.csv"
PPCURVE = "ppcurve.csv"
COVERAGE = "coverage.csv"
REPORT_FILES = (SUMMARY, SCORES, PIT, PPCURVE, COVERAGE)


def _cell(v: Any) -> Any:
    return "" if v is None else v


def _write_csv(path: Path, header: list[str], rows: Iterator[list[Any]]) -> None:
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _score_rows(r: StudyReport) -> Iterator[list[Any]]:
    for rec in r.records:
        yield [rec.method, rec.scenario, rec.observed, rec.crps, rec.energy, rec.pit,
               rec.msep, rec.msep_variance, rec.msep_bias, rec.failure]


def _pit_rows(r: StudyReport) -> Iterator[list[Any]]:
    edges = np.linspace(0.0, 1.0, r.pit_bins + 1)
    for m in r.methods:
        for k, count in enumerate(m.pit_counts):
            yield [m.method, float(edges[k]), float(edges[k + 1]), count]


def _pp_rows(r: StudyReport) -> Iterator[list[Any]]:
    for m in r.methods:
        for p, frac in zip(r.pp_grid, m.pp_curve):
            yield [m.method, p, frac]


def _coverage_rows(r: StudyReport) -> Iterator[list[Any]]:
    for m in r.methods:
        for level, cov, width in zip(r.intervals, m.coverage, m.avg_width):
            yield [m.method, level, cov, width]


def emit_report(r: StudyReport, directory: Path) -> list[Path]:
    """Write the five report files into ``directory`` (created if missing)."""
    directory = Path(directory)
    try:
        text = json.dumps(r.to_dict(), indent=2, allow_nan=False) + "\n"
    except ValueError as e:
        raise ReportIOError(f"{SUMMARY}: {e}") from None
    try:
        directory.mkdir(parents=True, exist_ok=True)
        (directory / SUMMARY).write_text(text, encoding="utf-8")
        _write_csv(directory / SCORES,
                   ["method", "scenario", "observed", "crps", "energy", "pit",
                    "msep", "msep_variance", "msep_bias", "failure"],
                   _score_rows(r))
        _write_csv(directory / PIT, ["method", "bin_left", "bin_right", "count"], _pit_rows(r))
        _write_csv(directory / PPCURVE, ["method", "p", "fraction"], _pp_rows(r))
        _write_csv(directory / COVERAGE, ["method", "level", "coverage", "avg_width"],
                   _coverage_rows(r))
    except OSError as e:
        raise ReportIOError(f"{e.filename or directory}: {e.strerror}") from None
    logger.info("report written to %s", directory)
    return [directory / name for name in REPORT_FILES]


def _summary_path(path: Path) -> Path:
    path = Path(path)
    return path / SUMMARY if path.is_dir() else path


def load_report(path: Path) -> StudyReport:
    """Read summary.json (or a directory holding it) back into a StudyReport."""
    p = _summary_path(path)
    try:
        with p.open("r", encoding="utf-8") as f:
            doc = json.load(f)
        return StudyReport.from_dict(doc)
    except OSError as e:
        raise ReportIOError(f"{p}: {e.strerror}") from None
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise ReportIOError(f"{p}: not a study report ({e})") from None


class ReportLoader:
    """
    Streaming reader for large summary.json files.
    Method summaries and scenario records are parsed one at a time.
    """

    def __init__(self, path: Path):
        self.path = _summary_path(path)
        self._fh: TextIO | None = None

    def __enter__(self) -> Self:
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    # -------- open / iter -------- #
    def _reopen(self) -> TextIO:
        self.close()
        try:
            self._fh = self.path.open("r", encoding="utf-8")
        except OSError as e:
            raise ReportIOError(f"{self.path}: {e.strerror}") from None
        return self._fh

    def methods(self) -> Iterator[MethodSummary]:
        for item in self._items("methods.item"):
            yield MethodSummary(**item)

    def records(self, method: str | None = None) -> Iterator[ScenarioRecord]:
        for item in self._items("records.item"):
            if method is None or item["method"] == method:
                yield ScenarioRecord(**item)

    def intervals(self) -> list[float]:
        for levels in self._items("intervals"):
            return [float(v) for v in levels]
        raise ReportIOError(f"{self.path}: no interval levels")

    def count_records(self) -> int:
        cnt = 0
        for _ in self._items("records.item"):
            cnt += 1
        return cnt

    def _items(self, prefix: str) -> Iterator[Any]:
        fh = self._reopen()
        try:
            yield from ijson.items(fh, prefix, use_float=True)
        except ijson.JSONError as e:
            raise ReportIOError(f"{self.path}: {e}") from None
        finally:
            self.close()

    def close(self) -> None:
        if self._fh:
            try:
                self._fh.close()
            finally:
                self._fh = None


def format_table(methods: list[MethodSummary], intervals: list[float]) -> str:
    """Fixed-width per-method table for the terminal."""
    head = ["method", "crps", "energy", "msep_mean", "msep_median"]
    head += [f"cov{round(lv * 100)}" for lv in intervals]
    head += [f"width{round(lv * 100)}" for lv in intervals]
    head += ["failed", "pit_p"]
    lines = ["".join(f"{h:>14}" if i else f"{h:<16}" for i, h in enumerate(head))]

    def num(v: float | None, fmt: str) -> str:
        return "-" if v is None else format(v, fmt)

    for m in methods:
        cells = [num(m.mean_crps, ".1f"), num(m.mean_energy, ".2f"),
                 num(m.mean_msep, ".4g"), num(m.median_msep, ".4g")]
        cells += [num(c, ".1f") for c in m.coverage]
        cells += [num(w, ".1f") for w in m.avg_width]
        cells += [str(m.failed), num(m.pit_pvalue, ".3g")]
        lines.append(f"{m.method:<16}" + "".join(f"{c:>14}" for c in cells))
    return "\n".join(lines)
