"""Shared helpers for building small co-matrices and histories by hand."""

import numpy as np
import pytest

from finatoms.comovement import CoMatrix
from finatoms.phc import ClusterHistory


def make_comatrix(counts, T=522, tickers=None) -> CoMatrix:
    """CoMatrix from a square integer array (symmetrized, diagonal zeroed)."""
    counts = np.asarray(counts, dtype=np.int64)
    n = counts.shape[0]
    counts = np.maximum(counts, counts.T)
    np.fill_diagonal(counts, 0)
    co = np.full((n, n), T, dtype=np.uint32)
    np.fill_diagonal(co, 0)
    if tickers is None:
        tickers = tuple(f"T{i:02d}" for i in range(n))
    return CoMatrix(
        counts=counts.astype(np.uint32), co_assigned=co, T=T, tickers=tickers
    )


def make_history(levels, linkage="complete") -> ClusterHistory:
    """History whose level-by-size curve equals ``levels`` (sizes 2, 3, ...)."""
    return ClusterHistory(
        seed=(0, 1),
        seed_level=levels[0],
        admissions=tuple((k + 2, lvl) for k, lvl in enumerate(levels[1:])),
        masked=frozenset(),
        linkage=linkage,
    )


def random_comatrix(rng, n, t=522) -> CoMatrix:
    counts = rng.integers(0, t + 1, size=(n, n))
    return make_comatrix(counts, T=t)


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)
