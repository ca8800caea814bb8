"""CSV ingestion for ``series,time,value`` tables."""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .experiments import Series

__all__ = [
    "HEADER",
    "IngestError",
    "MalformedRow",
    "NonMonotoneTime",
    "DuplicateTimePoint",
    "Row",
    "DataTable",
    "ingest_csv",
    "parse_csv",
    "write_csv",
]

HEADER = ("series", "time", "value")
MISSING_TOKENS = ("", "NA")


class IngestError(ValueError):
    code = "INGEST"

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class MalformedRow(IngestError):
    code = "MALFORMED_ROW"


class NonMonotoneTime(IngestError):
    code = "NON_MONOTONE_TIME"


class DuplicateTimePoint(IngestError):
    code = "DUPLICATE_TIME_POINT"


@dataclass(frozen=True)
class Row:
    series: str
    time: float
    value: float  # NaN marks a missing response
    line: int

    @property
    def missing(self) -> bool:
        return math.isnan(self.value)


@dataclass
class DataTable:
    rows: list[Row] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def series_ids(self) -> list[str]:
        return list(dict.fromkeys(r.series for r in self.rows))

    def to_series(self) -> list[Series]:
        """Group rows by series id, keeping first-appearance order."""
        groups: dict[str, list[Row]] = {}
        for r in self.rows:
            groups.setdefault(r.series, []).append(r)
        return [
            Series(sid, np.array([r.time for r in rows]), np.array([r.value for r in rows]))
            for sid, rows in groups.items()
        ]


def _number(text: str, what: str, line: int, allow_missing: bool) -> float:
    text = text.strip()
    if allow_missing and text in MISSING_TOKENS:
        return math.nan
    try:
        value = float(text)
    except ValueError:
        raise MalformedRow(line, f"{what} {text!r} is not a number") from None
    if not math.isfinite(value):
        raise MalformedRow(line, f"{what} must be finite, got {text!r}")
    return value


def parse_csv(lines: Iterable[str]) -> DataTable:
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedRow(1, "missing header; expected 'series,time,value'") from None
    if tuple(h.strip() for h in header) != HEADER:
        raise MalformedRow(1, f"header must be 'series,time,value', got {','.join(header)!r}")
    table = DataTable()
    last_time: dict[str, float] = {}
    seen: dict[tuple[str, float], int] = {}
    for fields in reader:
        line = reader.line_num
        if not fields or (len(fields) == 1 and not fields[0].strip()):
            continue
        if len(fields) != 3:
            raise MalformedRow(line, f"expected 3 fields, got {len(fields)}")
        sid = fields[0].strip()
        if not sid:
            raise MalformedRow(line, "empty series id")
        t = _number(fields[1], "time", line, allow_missing=False)
        v = _number(fields[2], "value", line, allow_missing=True)
        if (sid, t) in seen:
            raise DuplicateTimePoint(line, f"series {sid!r} repeats time {t:g} (first at line {seen[sid, t]})")
        if sid in last_time and t <= last_time[sid]:
            raise NonMonotoneTime(line, f"series {sid!r} time {t:g} does not follow {last_time[sid]:g}")
        seen[sid, t] = line
        last_time[sid] = t
        table.rows.append(Row(sid, t, v, line))
    return table


def ingest_csv(path: str | os.PathLike) -> DataTable:
    """Read and validate a UTF-8 ``series,time,value`` file.

    Empty fields and ``NA`` in the value column are missing responses.

    Raises
    ------
    MalformedRow, NonMonotoneTime, DuplicateTimePoint
        With the 1-based line number of the offending row.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_csv(fh)


def write_csv(series: Iterable[Series], fh: io.TextIOBase | None = None) -> str:
    """Serialize series in the ingest schema; returns the text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for s in series:
        for t, v in zip(s.times, s.values):
            writer.writerow([s.id, repr(float(t)), "NA" if math.isnan(v) else repr(float(v))])
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text
