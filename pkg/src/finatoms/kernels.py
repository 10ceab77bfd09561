"""Backend selection for the co-movement counting kernel.

The compiled packed-bit kernel is used when available; otherwise the
numpy matmul fallback.  Both return identical integer counts.  Override
with FINATOMS_KERNEL=py|cy; thread count via FINATOMS_THREADS.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernel_py

try:
    from . import _kernel_cy

    HAVE_EXTENSION = True
except ImportError:  # pragma: no cover - source checkout without build
    _kernel_cy = None
    HAVE_EXTENSION = False


def default_threads() -> int:
    env = os.environ.get("FINATOMS_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def active_backend() -> str:
    forced = os.environ.get("FINATOMS_KERNEL", "").lower()
    if forced == "py":
        return "py"
    if forced == "cy":
        if not HAVE_EXTENSION:
            raise RuntimeError("FINATOMS_KERNEL=cy but extension not built")
        return "cy"
    return "cy" if HAVE_EXTENSION else "py"


def pack_signs(signs: np.ndarray):
    """Pack an int8 sign matrix into (plus, minus) uint64 bitplanes."""
    n, t = signs.shape
    n_words = (t + 63) // 64
    planes = []
    for plane in (signs > 0, signs < 0):
        bits = np.packbits(plane, axis=1, bitorder="little")
        padded = np.zeros((n, n_words * 8), dtype=np.uint8)
        padded[:, : bits.shape[1]] = bits
        planes.append(np.ascontiguousarray(padded).view(np.uint64))
    return planes[0], planes[1]


def comovement_counts(signs: np.ndarray, n_threads: int | None = None):
    """Return (counts, co_assigned) uint32 N x N for an int8 sign matrix."""
    signs = np.ascontiguousarray(signs, dtype=np.int8)
    if n_threads is None:
        n_threads = default_threads()
    if active_backend() == "cy":
        n = signs.shape[0]
        plus, minus = pack_signs(signs)
        counts = np.zeros((n, n), dtype=np.uint32)
        co_assigned = np.zeros((n, n), dtype=np.uint32)
        _kernel_cy.comovement_packed(plus, minus, counts, co_assigned, n_threads)
        return counts, co_assigned
    return _kernel_py.comovement_counts(signs, n_threads)
