"""Numba acceleration switch.

Hot kernels are written once as plain Python/numpy and compiled with
``numba.njit`` when available. Setting ``TOPOMIX_NO_NUMBA=1`` (or having no
numba installed) selects the pure-numpy fallback path instead. The flag is
read once, at import time.
"""
import os

_FALSY = {"", "0", "false", "no", "off"}


def _env_flag(name):
    return os.environ.get(name, "").strip().lower() not in _FALSY


try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

HAVE_NUMBA = _numba is not None
USE_NUMBA = HAVE_NUMBA and not _env_flag("TOPOMIX_NO_NUMBA")


def njit(fn):
    """Compile ``fn`` in nopython mode; return it untouched if numba is missing."""
    if not HAVE_NUMBA:
        return fn
    return _numba.njit(cache=True, nogil=True)(fn)


def select(numba_impl, numpy_impl):
    """Pick the active implementation of a kernel according to the flag."""
    return numba_impl if USE_NUMBA else numpy_impl


def max_workers():
    """Worker cap from ``TOPOMIX_THREADS`` (defaults to the CPU count)."""
    raw = os.environ.get("TOPOMIX_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1
