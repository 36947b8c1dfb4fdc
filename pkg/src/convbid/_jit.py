"""Optional numba acceleration.

Kernels are written once in numpy-compatible Python and compiled with
``numba.njit`` when available.  Set ``CONVBID_DISABLE_JIT=1`` to run the
plain numpy path instead (useful for debugging and for the benchmark).
"""
import os

_DISABLED = os.environ.get("CONVBID_DISABLE_JIT", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError:
    _njit = None
    HAS_NUMBA = False


def jit(func):
    """Compile ``func`` with numba if enabled, else return it unchanged.

    The original function stays reachable as ``.py_func`` in both cases so
    callers can force the numpy path.
    """
    if HAS_NUMBA:
        return _njit(cache=True, nogil=True)(func)
    func.py_func = func
    return func


def backend_name():
    return "numba" if HAS_NUMBA else "numpy"
