"""CSV ingestion and machine-readable outputs.

Floats are written with 17 significant digits so a written series reads
back bit-for-bit.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DataError
from .inference import PosteriorDraws
from .model import ReturnSeries

SCHEMA_VERSION = 1
FLOAT_FORMAT = "%.17g"
DATE_COLUMNS = ("date", "time", "timestamp", "day")


def fmt_float(x) -> str:
    x = float(x)
    return "NA" if math.isnan(x) else FLOAT_FORMAT % x


def ingest(
    path,
    mode: str = "returns",
    column: Optional[str] = None,
    date_column: Optional[str] = None,
) -> ReturnSeries:
    """Read one value column (and an optional date column) from a CSV file
    with a header row.

    In ``prices`` mode the series becomes ``100 * log(P_t / P_{t-1})``. Without
    ``column`` the last non-date column is used.
    """
    if mode not in ("prices", "returns"):
        raise DataError(f"mode must be 'prices' or 'returns', got {mode!r}")
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    # keep file line numbers for error messages; skip blank lines
    rows = [(i, r) for i, r in enumerate(rows, start=1) if any(cell.strip() for cell in r)]
    if not rows:
        raise DataError(f"{path} is empty")
    header = [h.strip() for h in rows[0][1]]
    lowered = [h.lower() for h in header]
    if date_column is None:
        date_idx = next((i for i, h in enumerate(lowered) if h in DATE_COLUMNS), None)
    else:
        if date_column not in header:
            raise DataError(f"date column {date_column!r} not in header {header}")
        date_idx = header.index(date_column)
    if column is None:
        candidates = [i for i in range(len(header)) if i != date_idx]
        if not candidates:
            raise DataError(f"{path} has no value column")
        value_idx = candidates[-1]
    elif column in header:
        value_idx = header.index(column)
    else:
        raise DataError(f"column {column!r} not in header {header}")

    values, dates, bad = [], [], []
    for lineno, row in rows[1:]:
        try:
            v = float(row[value_idx])
        except (ValueError, IndexError):
            bad.append(lineno)
            continue
        if not math.isfinite(v):
            bad.append(lineno)
            continue
        values.append(v)
        if date_idx is not None:
            dates.append(row[date_idx].strip() if date_idx < len(row) else "")
    if bad:
        shown = ", ".join(map(str, bad[:10])) + (" ..." if len(bad) > 10 else "")
        raise DataError(f"{path}: non-numeric values on line(s) {shown}")
    if not values:
        raise DataError(f"{path} has a header but no data rows")

    y = np.asarray(values, dtype=float)
    if mode == "prices":
        if np.any(y <= 0):
            line = rows[1 + int(np.argmax(y <= 0))][0]
            raise DataError(f"{path}: non-positive price on line {line}")
        if len(y) < 2:
            raise DataError("need at least two prices to form a return")
        y = 100.0 * np.log(y[1:] / y[:-1])
        dates = dates[1:]
    return ReturnSeries(y, tuple(dates) if date_idx is not None else None)


def write_csv(path, header: Sequence[str], columns: Sequence) -> Path:
    """Write equal-length columns; floats use 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = len(columns[0]) if columns else 0
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(n):
            row = []
            for col in columns:
                v = col[i]
                if isinstance(v, (float, np.floating)):
                    row.append(fmt_float(v))
                elif isinstance(v, (np.integer,)):
                    row.append(str(int(v)))
                else:
                    row.append(v)
            w.writerow(row)
    return path


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = {"schema_version": SCHEMA_VERSION, **payload}
    path.write_text(json.dumps(body, indent=2, allow_nan=False, default=_json_default) + "\n")
    return path


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read JSON from {path}: {exc}") from exc


def write_draws(path, draws: PosteriorDraws) -> Path:
    X = draws.matrix()
    header = ["draw"] + draws.names + ["loglik"]
    cols = [np.arange(1, len(draws) + 1)] + [X[:, i] for i in range(X.shape[1])] + [draws.loglik]
    return write_csv(path, header, cols)


def read_draws_matrix(path):
    """Header and float matrix of a draws CSV."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]])
