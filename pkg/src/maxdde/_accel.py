"""JIT switch for the numeric kernels.

Kernels are written once. With numba available they are compiled with
``numba.njit``; setting ``MAXDDE_DISABLE_JIT=1`` (or running without numba)
leaves them as plain Python functions operating on numpy arrays.
"""

import os

_FLAG = os.environ.get("MAXDDE_DISABLE_JIT", "").strip().lower()
JIT_REQUESTED = _FLAG not in ("1", "true", "yes", "on")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USING_JIT = JIT_REQUESTED and numba is not None


def njit(func):
    if USING_JIT:
        return numba.njit(cache=True, nogil=True)(func)
    return func


__all__ = ["njit", "USING_JIT", "JIT_REQUESTED"]
