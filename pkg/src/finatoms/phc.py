"""Seeded partial hierarchical clustering and boundary detection.

A cluster grows outward from a seed pair: at every step the unmasked
candidate with the best linkage to the current cluster is admitted, and
the admission level recorded.  The resulting level-vs-size curve (the
clustering history) is scanned for sharp slope changes, which mark
natural cluster boundaries.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .comovement import CoMatrix
from .errors import (
    HistoryTooShort,
    InternalInvariantError,
    PreconditionError,
    SeedMasked,
)

LINKAGES = ("single", "average", "complete")

DEFAULT_MIN_SIZE = 3
DEFAULT_PROMINENCE = 5.0


@dataclass(frozen=True)
class ClusterHistory:
    """Admission record of a seeded cluster growth.

    ``levels_by_size()[k]`` is the correlation level of the cluster at
    size k+2: the seed level first, then one level per admission.
    """

    seed: tuple[int, int]
    seed_level: float
    admissions: tuple[tuple[int, float], ...]
    masked: frozenset[int]
    linkage: str

    def members(self, size: int | None = None) -> tuple[int, ...]:
        """Cluster members in admission order, optionally cut at ``size``."""
        full = self.seed + tuple(idx for idx, _ in self.admissions)
        return full if size is None else full[:size]

    def levels_by_size(self) -> np.ndarray:
        return np.array(
            [self.seed_level] + [lvl for _, lvl in self.admissions], dtype=np.float64
        )

    @property
    def max_size(self) -> int:
        return 2 + len(self.admissions)


@dataclass(frozen=True, order=True)
class Boundary:
    """A sharp slope change in a clustering history."""

    size: int
    sharpness: float
    kind: str  # drop | kink | spike


def linkage_level(matrix: CoMatrix, cluster, candidate: int, linkage: str) -> float:
    """Candidate-to-cluster level: max (single), mean (average), min (complete)."""
    cluster = list(cluster)
    if not cluster:
        raise PreconditionError("cluster must be non-empty")
    if candidate in cluster:
        raise PreconditionError("candidate already in cluster")
    vals = matrix.counts[cluster, candidate].astype(np.int64)
    if linkage == "single":
        return int(vals.max())
    if linkage == "average":
        return float(vals.mean())
    if linkage == "complete":
        return int(vals.min())
    raise PreconditionError(f"unknown linkage {linkage!r}")


def grow_cluster(
    matrix: CoMatrix,
    seed: tuple[int, int],
    linkage: str = "complete",
    masked=frozenset(),
    max_size: int | None = None,
) -> ClusterHistory:
    """Grow a cluster from ``seed``, recording each admission level.

    Candidate statistics are maintained incrementally (running min / max /
    sum against the cluster), so each admission costs O(N).  Ties break to
    the lowest ticker-order index.  Complete-link histories are checked
    for monotonicity on the way out.
    """
    if linkage not in LINKAGES:
        raise PreconditionError(f"unknown linkage {linkage!r}")
    i, j = seed
    n = matrix.n_stocks
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise PreconditionError(f"bad seed {seed}")
    masked = frozenset(masked)
    if i in masked or j in masked:
        raise SeedMasked(f"seed {seed} intersects masked set")
    if max_size is None:
        max_size = n
    if max_size > n:
        raise PreconditionError(f"max_size {max_size} exceeds N={n}")

    counts = matrix.counts.astype(np.int64)
    excluded = np.zeros(n, dtype=bool)
    excluded[list(masked)] = True
    excluded[[i, j]] = True

    # running candidate statistic vs the current cluster
    if linkage == "single":
        stat = np.maximum(counts[i], counts[j])
    elif linkage == "complete":
        stat = np.minimum(counts[i], counts[j])
    else:
        stat = counts[i] + counts[j]

    admissions = []
    size = 2
    while size < max_size and not excluded.all():
        scores = np.where(excluded, np.int64(-1), stat)
        best = int(np.argmax(scores))  # first occurrence = lowest index
        if linkage == "average":
            level = float(stat[best]) / size
        else:
            level = int(stat[best])
        admissions.append((best, level))
        excluded[best] = True
        if linkage == "single":
            np.maximum(stat, counts[best], out=stat)
        elif linkage == "complete":
            np.minimum(stat, counts[best], out=stat)
        else:
            stat += counts[best]
        size += 1

    seed_level = int(counts[i, j])
    history = ClusterHistory(
        seed=(i, j),
        seed_level=seed_level,
        admissions=tuple(admissions),
        masked=masked,
        linkage=linkage,
    )
    if linkage == "complete" and len(admissions) > 1:
        # monotone along admissions only; the seed of a rerun need not be
        # the global maximum, so the first admission may sit above it
        levels = np.array([lvl for _, lvl in admissions])
        if (np.diff(levels) > 0).any():
            raise InternalInvariantError("complete-link levels increased")
    return history


def detect_boundaries(
    history: ClusterHistory,
    min_size: int = DEFAULT_MIN_SIZE,
    max_size: int | None = None,
    prominence: float = DEFAULT_PROMINENCE,
) -> list[Boundary]:
    """Find natural boundaries as local maxima of the slope change.

    With L_s the level at cluster size s and d_s = L_{s+1} - L_s, the
    sharpness at size s is the slope loss d_{s-1} - d_s where positive
    (the slope before the seed is taken as zero).  Only slope losses
    qualify: the level curve falls away after a boundary, and the
    mirror-image slope recovery one step later is the foot of the same
    cliff, not a second boundary.  A size is reported if its sharpness is
    a local maximum and exceeds ``prominence`` times the median sharpness
    over the search window.  Results are sorted by descending sharpness,
    ties to the smaller size.
    """
    if len(history.admissions) < 3:
        raise HistoryTooShort(
            f"need >= 3 admissions, got {len(history.admissions)}"
        )
    levels = history.levels_by_size()  # index k -> size k+2
    top = history.max_size
    if max_size is None:
        max_size = top - 1
    max_size = min(max_size, top - 1)
    if not 2 <= min_size < max_size + 1:
        raise PreconditionError(f"bad boundary window [{min_size}, {max_size}]")

    # d[s] for sizes 2..top-1; sharpness defined for the same range
    slopes = np.diff(levels)  # slopes[k] = d_{k+2}
    prev = np.concatenate(([0.0], slopes[:-1]))
    sharpness = np.maximum(prev - slopes, 0.0)  # sharpness[k] at size k+2

    def sharp_at(size: int) -> float:
        k = size - 2
        return sharpness[k] if 0 <= k < len(sharpness) else -np.inf

    window = range(max(min_size, 2), max_size + 1)
    in_window = [sharp_at(s) for s in window]
    if not in_window:
        return []
    median = float(np.median(in_window))

    out = []
    for s in window:
        val = sharp_at(s)
        if val <= 0 or val <= prominence * median:
            continue
        if not (val > sharp_at(s - 1) and val >= sharp_at(s + 1)):
            continue
        d_before = float(prev[s - 2])
        d_after = float(slopes[s - 2])
        if d_before > 0 > d_after:
            kind = "spike"
        elif d_after < d_before < 0:
            kind = "drop"
        else:
            kind = "kink"
        out.append(Boundary(size=s, sharpness=float(val), kind=kind))
    out.sort(key=lambda b: (-b.sharpness, b.size))
    return out


def export_history_csv(history: ClusterHistory, tickers, path) -> None:
    """History CSV `size,admitted_ticker,level` (seed pair at sizes 1-2)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["size", "admitted_ticker", "level"])
        writer.writerow([1, tickers[history.seed[0]], history.seed_level])
        writer.writerow([2, tickers[history.seed[1]], history.seed_level])
        for k, (idx, level) in enumerate(history.admissions):
            writer.writerow([3 + k, tickers[idx], level])
