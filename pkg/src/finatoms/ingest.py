"""Loading and alignment of daily price panels.

Price files are CSV with rows ``date,ticker,close`` (ISO-8601 dates,
optional header, ``#`` comment lines ignored).  Sector metadata files are
CSV with rows ``ticker,name,sector[,remarks]``.  Alignment puts every
series onto the union of all observed trading days; missing quotes stay
missing (they are never forward-filled, which would manufacture zero
deltas downstream).
"""

from __future__ import annotations

import csv
import datetime
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DuplicateObservation,
    NonPositivePrice,
    ParseError,
    TooFewSeries,
)

DEFAULT_MIN_COVERAGE = 0.6


@dataclass(frozen=True)
class PriceSeries:
    """Daily closes of a single ticker, sorted by date."""

    ticker: str
    dates: tuple[datetime.date, ...]
    prices: tuple[float, ...]

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ParseError(f"{self.ticker}: dates not strictly increasing")
        if any(p <= 0 or not math.isfinite(p) for p in self.prices):
            raise NonPositivePrice(f"{self.ticker}: non-positive price")


@dataclass(frozen=True)
class SectorInfo:
    name: str
    sector: str
    remarks: str | None = None


@dataclass(frozen=True)
class SectorTable:
    entries: dict[str, SectorInfo] = field(default_factory=dict)

    def sector_of(self, ticker: str) -> str | None:
        info = self.entries.get(ticker)
        return info.sector if info else None


@dataclass(frozen=True)
class MarketPanel:
    """N tickers x (T+1) trading days; NaN marks a missing quote."""

    tickers: tuple[str, ...]
    dates: tuple[datetime.date, ...]
    prices: np.ndarray  # float64, shape (N, T+1)
    sectors: dict[str, str] = field(default_factory=dict)
    dropped: tuple[str, ...] = ()  # tickers removed by the coverage filter

    def __post_init__(self):
        n, t1 = self.prices.shape
        if n != len(self.tickers) or n < 2 or t1 < 2:
            raise TooFewSeries(f"panel must be at least 2x2, got {n}x{t1}")

    @property
    def n_stocks(self) -> int:
        return len(self.tickers)

    @property
    def n_windows(self) -> int:
        return len(self.dates) - 1

    def to_series(self) -> list[PriceSeries]:
        """Decompose back into per-ticker series (present quotes only)."""
        out = []
        for i, ticker in enumerate(self.tickers):
            mask = ~np.isnan(self.prices[i])
            out.append(
                PriceSeries(
                    ticker=ticker,
                    dates=tuple(d for d, m in zip(self.dates, mask) if m),
                    prices=tuple(float(p) for p in self.prices[i][mask]),
                )
            )
        return out


def _data_rows(path) -> list[tuple[int, list[str]]]:
    """CSV rows with line numbers, skipping blanks and # comments."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            if row[0].lstrip().startswith("#"):
                continue
            rows.append((lineno, [cell.strip() for cell in row]))
    return rows


def _parse_date(text: str, lineno: int) -> datetime.date:
    try:
        return datetime.date.fromisoformat(text)
    except ValueError:
        raise ParseError(f"bad date {text!r}", line=lineno) from None


def load_prices(path, fmt: str = "csv") -> list[PriceSeries]:
    """Load `date,ticker,close` rows into one PriceSeries per ticker."""
    if fmt != "csv":
        raise ParseError(f"unknown price-file format {fmt!r}")
    rows = _data_rows(path)
    if rows and rows[0][1][:1] and not _looks_like_data(rows[0][1]):
        rows = rows[1:]  # optional header

    observed: dict[str, dict[datetime.date, float]] = {}
    for lineno, row in rows:
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", line=lineno)
        date = _parse_date(row[0], lineno)
        ticker = row[1]
        if not ticker:
            raise ParseError("empty ticker", line=lineno)
        try:
            price = float(row[2])
        except ValueError:
            raise ParseError(f"bad price {row[2]!r}", line=lineno) from None
        if price <= 0 or not math.isfinite(price):
            raise NonPositivePrice(f"{ticker}: price {price}", line=lineno)
        series = observed.setdefault(ticker, {})
        if date in series:
            raise DuplicateObservation(f"{ticker} on {date}", line=lineno)
        series[date] = price

    out = []
    for ticker in sorted(observed):
        dates = tuple(sorted(observed[ticker]))
        out.append(
            PriceSeries(
                ticker=ticker,
                dates=dates,
                prices=tuple(observed[ticker][d] for d in dates),
            )
        )
    return out


def _looks_like_data(row: list[str]) -> bool:
    if len(row) != 3:
        return True  # let the row-level check produce the error
    try:
        datetime.date.fromisoformat(row[0])
        float(row[2])
    except ValueError:
        return False
    return True


def load_sectors(path) -> SectorTable:
    """Load `ticker,name,sector[,remarks]` metadata rows."""
    entries: dict[str, SectorInfo] = {}
    for lineno, row in _data_rows(path):
        if len(row) not in (3, 4):
            raise ParseError(f"expected 3 or 4 fields, got {len(row)}", line=lineno)
        ticker, name, sector = row[0], row[1], row[2]
        if not sector:
            raise ParseError("empty sector label", line=lineno)
        if ticker in entries:
            raise ParseError(f"duplicate ticker {ticker!r}", line=lineno)
        remarks = row[3] if len(row) == 4 and row[3] else None
        entries[ticker] = SectorInfo(name=name, sector=sector, remarks=remarks)
    return SectorTable(entries=entries)


def align_panel(
    series: list[PriceSeries],
    min_coverage: float = DEFAULT_MIN_COVERAGE,
    sectors: SectorTable | None = None,
) -> MarketPanel:
    """Align series onto the sorted union of their observation dates.

    Series whose quotes cover less than ``min_coverage`` of the union grid
    are dropped (and listed in ``MarketPanel.dropped``); at least two must
    survive.
    """
    if len(series) < 2:
        raise TooFewSeries(f"need at least 2 series, got {len(series)}")
    if not 0 < min_coverage <= 1:
        raise TooFewSeries(f"min_coverage must be in (0, 1], got {min_coverage}")

    dates = tuple(sorted({d for s in series for d in s.dates}))
    date_pos = {d: k for k, d in enumerate(dates)}

    kept, dropped = [], []
    for s in sorted(series, key=lambda s: s.ticker):
        if len(s.dates) / len(dates) >= min_coverage:
            kept.append(s)
        else:
            dropped.append(s.ticker)
    if len(kept) < 2:
        raise TooFewSeries(
            f"only {len(kept)} series meet min_coverage={min_coverage}"
        )

    prices = np.full((len(kept), len(dates)), np.nan)
    for i, s in enumerate(kept):
        for d, p in zip(s.dates, s.prices):
            prices[i, date_pos[d]] = p

    sector_map = {}
    if sectors is not None:
        for s in kept:
            label = sectors.sector_of(s.ticker)
            if label is not None:
                sector_map[s.ticker] = label

    return MarketPanel(
        tickers=tuple(s.ticker for s in kept),
        dates=dates,
        prices=prices,
        sectors=sector_map,
        dropped=tuple(dropped),
    )
