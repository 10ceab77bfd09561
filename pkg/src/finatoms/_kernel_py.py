"""Pure-numpy co-movement kernel (BLAS matmul on 0/1 sign planes).

Fallback used when the compiled extension is unavailable.  Products and
sums stay below 2**24 so float32 matmul is exact; results are identical
to the packed-bit kernel.
"""

from __future__ import annotations

import numpy as np


def comovement_counts(signs: np.ndarray, n_threads: int = 0):
    """Return (counts, co_assigned) as uint32 N x N arrays.

    ``signs`` is int8 with values +1, -1, 0 (0 = unassigned).  BLAS picks
    its own thread count; ``n_threads`` is accepted for interface parity.
    """
    plus = (signs > 0).astype(np.float32)
    minus = (signs < 0).astype(np.float32)
    counts = plus @ plus.T + minus @ minus.T
    assigned = plus + minus
    co_assigned = assigned @ assigned.T
    counts = counts.astype(np.uint32)
    co_assigned = co_assigned.astype(np.uint32)
    np.fill_diagonal(counts, 0)
    np.fill_diagonal(co_assigned, 0)
    return counts, co_assigned
