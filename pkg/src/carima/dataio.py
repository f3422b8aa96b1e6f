"""CSV ingestion with calendar alignment and first-class missing values."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import NonMonotoneDates, ParseError, UnknownColumn
from .series import TimeSeries


@dataclass(frozen=True)
class Dataset:
    """Daily-frequency columns sharing one strictly increasing calendar.

    Calendar gaps are filled with explicit missing rows at ingestion, so
    every column is a contiguous daily TimeSeries.
    """

    dates: tuple
    columns: dict

    def __len__(self) -> int:
        return len(self.dates)

    def series(self, name: str) -> TimeSeries:
        if name not in self.columns:
            raise UnknownColumn(f"column {name!r} not in dataset ({sorted(self.columns)})")
        return self.columns[name]

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        return np.column_stack([self.series(n).values for n in names])

    def index_of_date(self, d: date) -> int:
        try:
            return self.dates.index(d)
        except ValueError:
            raise ParseError(f"date {d} outside dataset range {self.dates[0]}..{self.dates[-1]}")

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        names = list(self.columns)
        writer.writerow(["date"] + names)
        for i, d in enumerate(self.dates):
            row = [d.isoformat()]
            for n in names:
                col = self.columns[n]
                row.append("" if col.missing[i] else repr(float(col.values[i])))
            writer.writerow(row)
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv_text(), encoding="utf-8")


def _parse_cell(text: str, row: int, col: str) -> float:
    text = text.strip()
    if text == "":
        return np.nan
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"row {row}, column {col!r}: cannot parse {text!r} as a number")


def ingest_csv(path, date_column: str = "date", columns: Optional[Sequence[str]] = None) -> Dataset:
    """Read an RFC-4180 CSV with a header row into a calendar-aligned Dataset.

    Blank cells become missing values; gaps in the daily calendar are filled
    with missing rows.  Duplicated or decreasing dates raise
    NonMonotoneDates; malformed cells raise ParseError with row/column
    context (rows counted from 1 including the header).
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}")
    return parse_csv_text(text, date_column=date_column, columns=columns)


def parse_csv_text(
    text: str, date_column: str = "date", columns: Optional[Sequence[str]] = None
) -> Dataset:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file: a header row is required")
    header = [h.strip() for h in header]
    if date_column not in header:
        raise UnknownColumn(f"date column {date_column!r} not in header {header}")
    if columns is None:
        columns = [h for h in header if h != date_column]
    for c in columns:
        if c not in header:
            raise UnknownColumn(f"requested column {c!r} not in header {header}")
    idx_date = header.index(date_column)
    idx_cols = {c: header.index(c) for c in columns}

    dates = []
    values = {c: [] for c in columns}
    for rownum, row in enumerate(reader, start=2):
        if not row or all(cell.strip() == "" for cell in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"row {rownum}: expected {len(header)} fields, got {len(row)}")
        try:
            d = date.fromisoformat(row[idx_date].strip())
        except ValueError:
            raise ParseError(f"row {rownum}, column {date_column!r}: bad date {row[idx_date]!r}")
        if dates and d <= dates[-1]:
            raise NonMonotoneDates(
                f"row {rownum}: date {d} not after previous date {dates[-1]}"
            )
        dates.append(d)
        for c in columns:
            values[c].append(_parse_cell(row[idx_cols[c]], rownum, c))
    if not dates:
        raise ParseError("no data rows")

    # fill calendar gaps with missing rows
    full_dates = []
    cursor = dates[0]
    while cursor <= dates[-1]:
        full_dates.append(cursor)
        cursor = cursor + timedelta(days=1)
    pos = {d: i for i, d in enumerate(full_dates)}
    n = len(full_dates)
    cols = {}
    for c in columns:
        vals = np.full(n, np.nan)
        for d, v in zip(dates, values[c]):
            vals[pos[d]] = v
        cols[c] = TimeSeries(vals, dates=full_dates)
    return Dataset(dates=tuple(full_dates), columns=cols)


def weekday_dummies(dates: Sequence[date]) -> dict:
    """Six day-of-week indicator columns (Friday is the baseline)."""
    names = {0: "mon", 1: "tue", 2: "wed", 3: "thu", 5: "sat", 6: "sun"}
    out = {}
    wd = np.array([d.weekday() for d in dates])
    for code, name in names.items():
        out[f"dow_{name}"] = TimeSeries((wd == code).astype(float), dates=tuple(dates))
    return out


def holiday_dummy(dates: Sequence[date], holidays: Sequence[date]) -> TimeSeries:
    """Indicator of the day before and the day after each holiday."""
    hs = set(holidays)
    flag = np.zeros(len(dates))
    for i, d in enumerate(dates):
        if (d + timedelta(days=1)) in hs or (d - timedelta(days=1)) in hs:
            flag[i] = 1.0
    return TimeSeries(flag, dates=tuple(dates))


def read_holiday_file(path) -> tuple:
    """One ISO date per line; blank lines and '#' comments ignored."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}")
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            out.append(date.fromisoformat(line))
        except ValueError:
            raise ParseError(f"{path}:{lineno}: bad date {line!r}")
    return tuple(out)
