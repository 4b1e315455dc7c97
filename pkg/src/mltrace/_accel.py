"""Numba switch.

Setting ``MLTRACE_DISABLE_NUMBA=1`` (or running without numba installed)
routes every hot kernel through its numpy/scipy fallback instead.
"""
import os

_disabled = os.environ.get("MLTRACE_DISABLE_NUMBA", "0").lower() in ("1", "true", "yes")

try:
    if _disabled:
        raise ImportError
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    numba = None
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit(cache=True, nogil=True)`` when numba is active, else a no-op."""
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    return numba.njit(*args, **kwargs)
