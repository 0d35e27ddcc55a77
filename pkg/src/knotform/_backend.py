"""Kernel backend selection.

The Monte-Carlo and quadrature kernels exist twice: an ``@njit`` loop
version and a vectorised numpy version.  Which one runs is decided once,
at import time, from the environment:

``KNOTFORM_BACKEND``
    ``numba`` (default when numba imports) or ``numpy``.
``KNOTFORM_DISABLE_NUMBA``
    any non-empty value other than ``0`` forces ``numpy``.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False


def _requested_backend():
    if os.environ.get("KNOTFORM_DISABLE_NUMBA", "0") not in ("", "0"):
        return "numpy"
    name = os.environ.get("KNOTFORM_BACKEND", "numba").strip().lower()
    if name not in ("numba", "numpy"):
        raise ValueError(f"KNOTFORM_BACKEND must be 'numba' or 'numpy', got {name!r}")
    return name


BACKEND = _requested_backend() if HAVE_NUMBA else "numpy"


def njit(fn=None, **kwargs):
    """``numba.njit`` with cache/nogil on; a no-op without numba."""
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)

    def wrap(f):
        if not HAVE_NUMBA:
            return f
        return numba.njit(**kwargs)(f)

    if fn is not None:
        return wrap(fn)
    return wrap


def use_numba():
    return BACKEND == "numba"
