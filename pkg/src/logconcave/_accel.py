"""Numba dispatch.

Kernels are written twice: a loop version compiled with numba and a
vectorized numpy version. Setting ``LOGCONCAVE_DISABLE_NUMBA=1`` in the
environment (or numba being unavailable) routes every call through the
numpy path. ``USE_NUMBA`` is read at call time, so tests may flip it.
"""

import os

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    numba = None
    HAS_NUMBA = False

_flag = os.environ.get("LOGCONCAVE_DISABLE_NUMBA", "").strip().lower()
USE_NUMBA = HAS_NUMBA and _flag not in ("1", "true", "yes", "on")


def njit(func):
    """``numba.njit(cache=True)`` when numba is importable, identity otherwise."""
    if HAS_NUMBA:
        return numba.njit(cache=True)(func)
    return func


def backend():
    return "numba" if USE_NUMBA else "numpy"
