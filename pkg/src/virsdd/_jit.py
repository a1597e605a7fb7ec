"""Numba switch.

Kernels are written once as plain Python over numpy arrays. When numba is
importable and ``VIRSDD_DISABLE_JIT`` is unset (or ``0``), they are compiled
with ``@njit``; otherwise the same functions run as ordinary Python.
"""
import os

_flag = os.environ.get("VIRSDD_DISABLE_JIT", "0").strip().lower()
DISABLED_BY_ENV = _flag not in ("", "0", "false", "no")

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

USE_NUMBA = _numba is not None and not DISABLED_BY_ENV


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, identity decorator otherwise."""
    if args and callable(args[0]) and len(args) == 1 and not kwargs:
        func = args[0]
        return _numba.njit(func) if USE_NUMBA else func

    def wrap(func):
        return _numba.njit(*args, **kwargs)(func) if USE_NUMBA else func

    return wrap
