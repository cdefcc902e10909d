"""Optional numba acceleration.

Set ``PRPPP_NO_NUMBA=1`` to force the pure-numpy kernels. Both paths return
bit-identical results; the flag only trades compile time for loop speed.
"""
from __future__ import annotations

import os

_disabled = os.environ.get("PRPPP_NO_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _disabled:
        raise ImportError("numba disabled by PRPPP_NO_NUMBA")
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False
    _njit = None


def njit(func):
    """Compile ``func`` with numba when available, else return it untouched."""
    if _njit is None:
        return func
    return _njit(cache=True, nogil=True)(func)


def worker_count() -> int:
    """Worker cap from ``PRPPP_THREADS`` (default: available cores)."""
    raw = os.environ.get("PRPPP_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)
