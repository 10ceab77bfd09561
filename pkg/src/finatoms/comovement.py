"""Short-time sign clustering and the long-time co-movement matrix.

Each panel step is one short-time window: a stock joins the '+' cluster
if its price rose over the step, the '-' cluster if it fell, and stays
unassigned on a zero change or a missing quote.  The long-time matrix C
counts, per stock pair, the windows in which both carried the same sign.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import InternalInvariantError, ParseError, PreconditionError
from .ingest import MarketPanel

CMX_MAGIC = b"CMX1"


@dataclass(frozen=True)
class SignMatrix:
    """N x T ternary movement assignments: +1, -1, or 0 (unassigned)."""

    signs: np.ndarray  # int8, shape (N, T)
    tickers: tuple[str, ...]
    windows: tuple[str, ...]

    def __post_init__(self):
        n, t = self.signs.shape
        if n != len(self.tickers) or t != len(self.windows):
            raise PreconditionError("sign matrix shape mismatch")

    @property
    def n_windows(self) -> int:
        return self.signs.shape[1]


@dataclass(frozen=True)
class CoMatrix:
    """Symmetric pairwise co-movement counts out of T windows.

    ``counts[i, j]`` is the number of windows where i and j carried the
    same sign; ``co_assigned[i, j]`` the number where both were assigned
    at all.  Diagonals are unused (zero).
    """

    counts: np.ndarray  # uint32, (N, N)
    co_assigned: np.ndarray  # uint32, (N, N)
    T: int
    tickers: tuple[str, ...]

    def __post_init__(self):
        n = len(self.tickers)
        if self.counts.shape != (n, n) or self.co_assigned.shape != (n, n):
            raise PreconditionError("co-matrix shape mismatch")

    @property
    def n_stocks(self) -> int:
        return len(self.tickers)

    def ratios(self) -> np.ndarray:
        """Diagnostic view counts / co_assigned (NaN where never co-assigned)."""
        with np.errstate(invalid="ignore", divide="ignore"):
            r = self.counts.astype(np.float64) / self.co_assigned
        return r

    def off_diagonal(self) -> np.ndarray:
        """Upper-triangle counts as a flat array."""
        iu = np.triu_indices(self.n_stocks, k=1)
        return self.counts[iu]


@dataclass(frozen=True)
class LevelSummary:
    """Background correlation level and the count histogram behind it."""

    c0: int
    distribution: np.ndarray = field(repr=False)  # histogram, bin width 1


def sign_deltas(panel: MarketPanel) -> SignMatrix:
    """Ternary daily movement signs from a price panel."""
    prices = panel.prices
    delta = prices[:, 1:] - prices[:, :-1]
    signs = np.zeros(delta.shape, dtype=np.int8)
    with np.errstate(invalid="ignore"):
        signs[delta > 0] = 1
        signs[delta < 0] = -1  # NaN deltas compare false on both -> 0
    windows = tuple(d.isoformat() for d in panel.dates[:-1])
    return SignMatrix(signs=signs, tickers=panel.tickers, windows=windows)


def comovement_matrix(signs: SignMatrix, n_threads: int | None = None) -> CoMatrix:
    """Count same-sign and both-assigned windows for every stock pair."""
    counts, co_assigned = kernels.comovement_counts(signs.signs, n_threads)
    if (counts > co_assigned).any():
        raise InternalInvariantError("counts exceed co_assigned")
    return CoMatrix(
        counts=counts,
        co_assigned=co_assigned,
        T=signs.n_windows,
        tickers=signs.tickers,
    )


def background_level(matrix: CoMatrix) -> LevelSummary:
    """Background level c0 = mode of the off-diagonal count histogram.

    The mode isolates the market-drift bulk; a mean would be dragged by
    the heavy atomic tail.  Ties resolve to the smallest count.
    """
    if matrix.n_stocks < 2:
        raise PreconditionError("background_level needs N >= 2")
    hist = np.bincount(matrix.off_diagonal(), minlength=matrix.T + 1)
    return LevelSummary(c0=int(np.argmax(hist)), distribution=hist)


def threshold_matrix(matrix: CoMatrix, c: int) -> CoMatrix:
    """Copy of the matrix with counts below ``c`` zeroed (co_assigned kept)."""
    if not 0 <= c <= matrix.T:
        raise PreconditionError(f"threshold {c} outside [0, {matrix.T}]")
    counts = matrix.counts.copy()
    counts[counts < c] = 0
    return replace(matrix, counts=counts)


def save_cmx(matrix: CoMatrix, path) -> None:
    """Write the versioned CMX1 binary container.

    Layout: magic ``CMX1``, u32 N, u32 T, u32 ticker-table byte length,
    newline-joined UTF-8 tickers, then the strict lower triangles of
    counts and co_assigned as u32 little-endian (row-major, i > j).
    """
    n = matrix.n_stocks
    table = "\n".join(matrix.tickers).encode("utf-8")
    il = np.tril_indices(n, k=-1)
    with open(path, "wb") as fh:
        fh.write(CMX_MAGIC)
        fh.write(struct.pack("<II", n, matrix.T))
        fh.write(struct.pack("<I", len(table)))
        fh.write(table)
        fh.write(matrix.counts[il].astype("<u4").tobytes())
        fh.write(matrix.co_assigned[il].astype("<u4").tobytes())


def load_cmx(path) -> CoMatrix:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CMX_MAGIC:
            raise ParseError(f"bad magic {magic!r}, expected {CMX_MAGIC!r}")
        n, t = struct.unpack("<II", fh.read(8))
        (table_len,) = struct.unpack("<I", fh.read(4))
        tickers = tuple(fh.read(table_len).decode("utf-8").split("\n"))
        if len(tickers) != n:
            raise ParseError(f"ticker table has {len(tickers)} entries, expected {n}")
        n_pairs = n * (n - 1) // 2
        payload = fh.read(2 * 4 * n_pairs)
        if len(payload) != 2 * 4 * n_pairs:
            raise ParseError("truncated triangle payload")
    flat = np.frombuffer(payload, dtype="<u4")
    il = np.tril_indices(n, k=-1)
    counts = np.zeros((n, n), dtype=np.uint32)
    co_assigned = np.zeros((n, n), dtype=np.uint32)
    counts[il] = flat[:n_pairs]
    counts += counts.T
    co_assigned[il] = flat[n_pairs:]
    co_assigned += co_assigned.T
    return CoMatrix(counts=counts, co_assigned=co_assigned, T=int(t), tickers=tickers)


def export_csv(matrix: CoMatrix, path) -> None:
    """Lossless pairwise CSV: ticker_i,ticker_j,count,co_assigned."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ticker_i", "ticker_j", "count", "co_assigned"])
        for i in range(matrix.n_stocks):
            for j in range(i + 1, matrix.n_stocks):
                writer.writerow(
                    [
                        matrix.tickers[i],
                        matrix.tickers[j],
                        int(matrix.counts[i, j]),
                        int(matrix.co_assigned[i, j]),
                    ]
                )
