# cython: boundscheck=False, wraparound=False, cdivision=True
"""Packed-bit co-movement kernel.

Signs are packed into 64-bit plus/minus bitplanes per stock; the count
for a pair is then a handful of AND + popcount operations per 64-day
chunk instead of a loop over days.  Parallelised over rows with OpenMP;
every (i, j) cell is computed independently, so the result is identical
to the sequential computation.
"""

import numpy as np

cimport numpy as cnp
from cython.parallel cimport prange

cdef extern from *:
    """
    static inline unsigned long long popcount64(unsigned long long x) {
        return __builtin_popcountll(x);
    }
    """
    unsigned long long popcount64(unsigned long long x) nogil


def comovement_packed(
    const unsigned long long[:, ::1] plus,
    const unsigned long long[:, ::1] minus,
    unsigned int[:, ::1] counts,
    unsigned int[:, ::1] co_assigned,
    int n_threads,
):
    """Fill counts / co_assigned from packed plus/minus bitplanes."""
    cdef Py_ssize_t n = plus.shape[0]
    cdef Py_ssize_t n_words = plus.shape[1]
    cdef Py_ssize_t i, j, w
    cdef unsigned long long same, both
    cdef unsigned long long pi, mi, pj, mj

    if n_threads < 1:
        n_threads = 1

    for i in prange(n, nogil=True, schedule="dynamic", num_threads=n_threads):
        for j in range(i + 1, n):
            same = 0
            both = 0
            for w in range(n_words):
                pi = plus[i, w]
                mi = minus[i, w]
                pj = plus[j, w]
                mj = minus[j, w]
                same = same + popcount64(pi & pj) + popcount64(mi & mj)
                both = both + popcount64((pi | mi) & (pj | mj))
            counts[i, j] = <unsigned int> same
            counts[j, i] = <unsigned int> same
            co_assigned[i, j] = <unsigned int> both
            co_assigned[j, i] = <unsigned int> both
