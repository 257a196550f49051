"""Numba switch.

Kernels are compiled with ``numba.njit`` unless ``NLFRAME_NUMBA=0`` is set in
the environment or numba cannot be imported, in which case the pure numpy
implementations in :mod:`nlframe.kernels` are used instead.
"""
import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False


def numba_enabled():
    return HAVE_NUMBA and os.environ.get("NLFRAME_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


def njit(fn):
    """Compile ``fn`` with numba if available, else return it unchanged."""
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True, fastmath=False, error_model="numpy")(fn)


def set_threads(n):
    if HAVE_NUMBA and n:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
