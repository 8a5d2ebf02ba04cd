"""CSV ingestion for DJIA- and NIFTY-50-style exports."""
from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from .series import Frame

log = logging.getLogger(__name__)

_SUFFIX = {"K": 1e3, "M": 1e6, "B": 1e9}
_MISSING = {"", "-", "--", "nan", "NaN", "null", "NULL", "N/A", "NA"}


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class CsvSchema:
    """What to read from a delimited export.

    ``numeric_columns`` are canonical names; ``aliases`` maps a canonical
    name to alternative header spellings found in the wild.
    """

    name: str
    date_column: str = "Date"
    date_formats: tuple = ("%Y-%m-%d",)
    numeric_columns: tuple = ()
    drop_columns: tuple = ()
    aliases: dict = field(default_factory=dict)
    symbol_column: str | None = None
    max_drop_fraction: float = 0.05


def builtin_schemas() -> dict:
    return {
        "djia": CsvSchema(
            name="djia",
            date_formats=("%m/%d/%Y", "%b %d, %Y", "%Y-%m-%d"),
            numeric_columns=("Price", "Open", "High", "Low", "Vol.", "Change %"),
        ),
        "nifty50": CsvSchema(
            name="nifty50",
            date_formats=("%Y-%m-%d", "%d-%m-%Y"),
            numeric_columns=("Prev Close", "Open", "High", "Low", "Last", "Close", "VWAP", "Volume",
                             "Turnover", "Trades", "Deliverable Volume", "%Deliverable"),
            drop_columns=("Symbol", "Series"),
            # the public Kaggle files misspell this header
            aliases={"%Deliverable": ("%Deliverble",)},
            symbol_column="Symbol",
        ),
    }


def get_schema(name: str) -> CsvSchema:
    schemas = builtin_schemas()
    try:
        return schemas[name]
    except KeyError:
        raise SchemaError(f"unknown schema {name!r}; available: {', '.join(sorted(schemas))}") from None


def generic_schema(header, date_column: str = "Date") -> CsvSchema:
    """Every column except the date column is numeric (canonical CSVs written by this package)."""
    if date_column not in header:
        raise SchemaError(f"missing date column {date_column!r}; header has {', '.join(header)}")
    return CsvSchema(name="generic", numeric_columns=tuple(c for c in header if c != date_column),
                     date_column=date_column)


def parse_number(cell: str) -> float:
    """Parse ``'34,302.61'``, ``'387.22M'`` or ``'0.22%'`` (percent units kept)."""
    s = cell.strip().replace(",", "")
    if s in _MISSING:
        raise ValueError(f"missing value {cell!r}")
    if s.endswith("%"):
        s = s[:-1]
    mult = 1.0
    if s and s[-1].upper() in _SUFFIX:
        mult = _SUFFIX[s[-1].upper()]
        s = s[:-1]
    value = float(s) * mult
    if not np.isfinite(value):
        raise ValueError(f"non-finite value {cell!r}")
    return value


def _parse_date(cell: str, formats) -> np.datetime64:
    s = cell.strip()
    for fmt in formats:
        try:
            return np.datetime64(datetime.strptime(s, fmt).date(), "D")
        except ValueError:
            continue
    raise ValueError(f"unparseable date {cell!r}")


def _norm(h: str) -> str:
    return re.sub(r"\s+", " ", h.strip().strip("﻿"))


def load_csv(path, schema: CsvSchema | str | None = None, symbol: str | None = None) -> Frame:
    """Read a delimited file into an ascending-date :class:`Frame`.

    Rows with any unparseable retained cell are dropped (with a logged count);
    dropping more than ``schema.max_drop_fraction`` of the rows is treated as a
    schema mismatch and raises :class:`SchemaError`.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = [_norm(h) for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file (no header row)") from None
        body = [row for row in reader if any(c.strip() for c in row)]

    if schema is None:
        schema = generic_schema(header)
    elif isinstance(schema, str):
        schema = get_schema(schema)
    if schema.date_column not in header:
        raise SchemaError(f"{path}: missing date column {schema.date_column!r}")
    pos = {}
    for col in schema.numeric_columns:
        for cand in (col,) + tuple(schema.aliases.get(col, ())):
            if cand in header:
                pos[col] = header.index(cand)
                break
        else:
            raise SchemaError(f"{path}: missing column {col!r} required by schema {schema.name!r}")
    if schema.symbol_column and symbol is not None:
        if schema.symbol_column not in header:
            raise SchemaError(f"{path}: no {schema.symbol_column!r} column to filter on")
        si = header.index(schema.symbol_column)
        body = [row for row in body if len(row) > si and row[si].strip() == symbol]
        if not body:
            raise SchemaError(f"{path}: no rows for symbol {symbol!r}")
    if not body:
        raise SchemaError(f"{path}: no data rows")

    di = header.index(schema.date_column)
    dates, values, dropped = [], [], 0
    for row in body:
        try:
            date = _parse_date(row[di], schema.date_formats)
            vals = [parse_number(row[pos[c]]) for c in schema.numeric_columns]
        except (ValueError, IndexError):
            dropped += 1
            continue
        dates.append(date)
        values.append(vals)
    if dropped:
        log.warning("%s: dropped %d of %d rows with unparseable cells", path, dropped, len(body))
    if dropped > schema.max_drop_fraction * len(body):
        raise SchemaError(f"{path}: dropped {dropped} of {len(body)} rows "
                          f"(> {schema.max_drop_fraction:.0%}); the schema probably does not match")

    dates = np.array(dates, dtype="datetime64[D]")
    order = np.argsort(dates, kind="stable")
    dates = dates[order]
    matrix = np.array(values, dtype=np.float64)[order]
    dup = np.nonzero(np.diff(dates).astype(np.int64) == 0)[0]
    if dup.size:
        raise SchemaError(f"{path}: duplicate date {dates[dup[0]]}")
    return Frame.from_matrix(dates, matrix, schema.numeric_columns)


def write_csv(frame: Frame, path, date_column: str = "Date"):
    """Canonical CSV: ISO dates, shortest round-tripping float text."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([date_column] + frame.names)
        cols = [frame.columns[n] for n in frame.names]
        for i, d in enumerate(frame.index):
            w.writerow([str(d)] + [repr(float(c[i])) for c in cols])
    return Path(path)
