"""CSV ingestion of return series and round-trip-safe CSV emission."""

from __future__ import annotations

import csv
import datetime as dt
import io
import math
from pathlib import Path

from .errors import DataError
from .series import ReturnSeries

HEADER = ["date", "return"]


def load_returns_csv(path) -> ReturnSeries:
    """Read a ``date,return`` file with strictly increasing ISO-8601 dates.

    Errors name the 1-based line of the offending row.
    """
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8-sig")
    except FileNotFoundError:
        raise DataError(f"{p}: no such file") from None
    except UnicodeDecodeError as exc:
        raise DataError(f"{p}: not valid UTF-8 ({exc.reason})") from None
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise DataError(f"{p}: empty file")
    if [c.strip().lower() for c in rows[0]] != HEADER:
        raise DataError(f"{p}:1: expected header 'date,return', got {','.join(rows[0])!r}")
    dates: list[str] = []
    values: list[float] = []
    prev = None
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise DataError(f"{p}:{lineno}: expected 2 fields, got {len(row)}")
        d_txt, r_txt = row[0].strip(), row[1].strip()
        try:
            d = dt.date.fromisoformat(d_txt)
        except ValueError:
            raise DataError(f"{p}:{lineno}: bad ISO-8601 date {d_txt!r}") from None
        try:
            r = float(r_txt)
        except ValueError:
            raise DataError(f"{p}:{lineno}: bad return value {r_txt!r}") from None
        if not math.isfinite(r):
            raise DataError(f"{p}:{lineno}: non-finite return {r_txt!r}")
        if prev is not None and d <= prev:
            kind = "duplicate" if d == prev else "out-of-order"
            raise DataError(f"{p}:{lineno}: {kind} date {d_txt} (previous {prev.isoformat()})")
        prev = d
        dates.append(d.isoformat())
        values.append(r)
    if not values:
        raise DataError(f"{p}: no data rows")
    return ReturnSeries(values, tuple(dates))


def write_returns_csv(path, returns: ReturnSeries) -> None:
    rows = [[d, cell(v)] for d, v in zip(returns.dates or range(len(returns)), returns.values)]
    write_table(path, HEADER, rows)


def cell(x) -> str:
    """Shortest round-trip text for numbers; NaN and None become empty."""
    if x is None:
        return ""
    if isinstance(x, (bool, str)):
        return str(x).lower() if isinstance(x, bool) else x
    if isinstance(x, int):
        return str(x)
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def write_table(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([cell(v) for v in row])


def read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]
