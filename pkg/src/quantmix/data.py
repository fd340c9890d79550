"""Price-series ingestion and the drawdown extraction pipeline.

A drawdown is the relative drop of a price from its running maximum; a
drawdown period is a maximal run of positive drawdowns bracketed by zeros.
The maximum drawdown of each period (optionally log-transformed) is the
quantity the mixture models are fitted to.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime
from typing import Sequence

import numpy as np

from .errors import DataError

__all__ = [
    "PriceSeries",
    "DrawdownRecord",
    "drawdown_series",
    "drawdown_periods",
    "load_prices",
    "load_sample",
]

_DATE_FORMATS = ("%Y-%m-%d", "%Y/%m/%d", "%m/%d/%Y", "%d.%m.%Y")
DEFAULT_PRICE_COLUMN = "Adj Close"


@dataclass(frozen=True)
class PriceSeries:
    """Positive prices with strictly increasing time keys."""

    t: tuple
    price: np.ndarray

    def __post_init__(self):
        price = np.asarray(self.price, dtype=float)
        object.__setattr__(self, "price", price)
        object.__setattr__(self, "t", tuple(self.t))
        if price.size == 0:
            raise DataError("price series is empty")
        if len(self.t) != price.size:
            raise DataError("time and price lengths differ")
        if np.any(price <= 0.0) or not np.all(np.isfinite(price)):
            raise DataError("prices must be positive and finite")
        keys = list(self.t)
        if any(b <= a for a, b in zip(keys, keys[1:])):
            raise DataError("time keys must be strictly increasing")


@dataclass(frozen=True)
class DrawdownRecord:
    """One drawdown period: bracketing indices and its maximum depth."""

    start: int
    end: int
    max_drawdown: float
    log_drawdown: float
    open_ended: bool = False


def drawdown_series(series: PriceSeries | Sequence[float]) -> np.ndarray:
    """Relative drop from the running maximum, d_t = (max_{i<=t} p_i - p_t) / max p_i."""
    price = series.price if isinstance(series, PriceSeries) else np.asarray(series, dtype=float)
    if price.size == 0:
        raise DataError("price series is empty")
    if np.any(price <= 0.0):
        raise DataError("prices must be positive")
    running = np.maximum.accumulate(price)
    return (running - price) / running


def drawdown_periods(d: Sequence[float], include_open: bool = True) -> list[DrawdownRecord]:
    """Maximal zero-bracketed positive runs of a drawdown series.

    A trailing run that never returns to zero is closed at the last index
    and flagged ``open_ended`` (callers typically exclude it from fitting).
    """
    dd = np.asarray(d, dtype=float)
    records: list[DrawdownRecord] = []
    start = None
    peak = 0.0
    for i, v in enumerate(dd):
        if v > 0.0:
            if start is None:
                start = max(i - 1, 0)  # d[i-1] == 0 by construction (d[0] == 0)
            peak = max(peak, float(v))
        elif start is not None:
            records.append(
                DrawdownRecord(
                    start=start,
                    end=i,
                    max_drawdown=peak,
                    log_drawdown=math.log(peak),
                )
            )
            start = None
            peak = 0.0
    if start is not None and include_open:
        records.append(
            DrawdownRecord(
                start=start,
                end=len(dd) - 1,
                max_drawdown=peak,
                log_drawdown=math.log(peak),
                open_ended=True,
            )
        )
    return records


def _parse_date(token: str):
    token = token.strip()
    for fmt in _DATE_FORMATS:
        try:
            return datetime.strptime(token, fmt).date()
        except ValueError:
            continue
    return None


def _resolve_column(header: list[str], selector, default: str | None, what: str) -> int:
    if selector is None and default is not None:
        for i, name in enumerate(header):
            if name.strip().lower() == default.lower():
                return i
        raise DataError(f"no {what} column named {default!r}; available: {header}")
    if isinstance(selector, int):
        if not 0 <= selector < len(header):
            raise DataError(f"{what} column index {selector} out of range")
        return selector
    for i, name in enumerate(header):
        if name.strip().lower() == str(selector).strip().lower():
            return i
    raise DataError(f"no {what} column named {selector!r}; available: {header}")


def load_prices(path, date_column=None, price_column=None) -> PriceSeries:
    """Read a comma-separated table into a price series, sorted by date.

    The date column defaults to the first column; the price column defaults
    to the header named "Adj Close".  Duplicate dates and non-positive
    prices are rejected; parse errors name the offending row.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows:
        raise DataError(f"{path}: empty file")
    header = rows[0]
    d_idx = 0 if date_column is None else _resolve_column(header, date_column, None, "date")
    p_idx = _resolve_column(header, price_column, DEFAULT_PRICE_COLUMN, "price")

    entries = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if max(d_idx, p_idx) >= len(row):
            raise DataError(f"{path}:{lineno}: expected at least {max(d_idx, p_idx) + 1} columns")
        date = _parse_date(row[d_idx])
        key = date if date is not None else row[d_idx].strip()
        try:
            price = float(row[p_idx])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: price {row[p_idx]!r} is not numeric") from exc
        if not math.isfinite(price) or price <= 0.0:
            raise DataError(f"{path}:{lineno}: price must be positive and finite, got {price}")
        entries.append((key, lineno, price))

    if not entries:
        raise DataError(f"{path}: no data rows")
    try:
        entries.sort(key=lambda e: e[0])
    except TypeError as exc:
        raise DataError(f"{path}: date column mixes parseable dates and plain strings") from exc
    for (a, la, _), (b, lb, _) in zip(entries, entries[1:]):
        if a == b:
            raise DataError(f"{path}:{lb}: duplicate timestamp {b!r} (also on row {la})")
    return PriceSeries(
        t=tuple(e[0] for e in entries), price=np.array([e[2] for e in entries])
    )


def load_sample(path, column=None) -> np.ndarray:
    """Read a sample: one value per line, or a CSV column chosen by name/index."""
    with open(path, newline="") as fh:
        text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DataError(f"{path}: empty file")
    if column is None and "," not in lines[0]:
        values = []
        for lineno, ln in enumerate(lines, start=1):
            try:
                values.append(float(ln))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {ln.strip()!r} is not numeric") from exc
        return np.asarray(values, dtype=float)
    rows = list(csv.reader(lines))
    header = rows[0]
    idx = _resolve_column(header, column, None, "sample") if column is not None else 0
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if idx >= len(row):
            raise DataError(f"{path}:{lineno}: missing column {idx}")
        try:
            values.append(float(row[idx]))
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {row[idx]!r} is not numeric") from exc
    if not values:
        raise DataError(f"{path}: no data rows")
    return np.asarray(values, dtype=float)
