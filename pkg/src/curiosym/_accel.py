"""Optional numba acceleration.

Set ``CURIOSYM_DISABLE_NUMBA=1`` before import to run every kernel as plain
Python/numpy. Both paths compute identical results; the flag only changes speed.
"""

from __future__ import annotations

import os

_DISABLED = os.environ.get("CURIOSYM_DISABLE_NUMBA", "0").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    numba = None
    HAVE_NUMBA = False


def maybe_njit(func=None, **kwargs):
    """``numba.njit`` when enabled, identity otherwise."""
    kwargs.setdefault("cache", True)

    def wrap(f):
        if not HAVE_NUMBA:
            return f
        return numba.njit(**kwargs)(f)

    if func is None:
        return wrap
    return wrap(func)


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


def python_impl(func):
    """Return the uncompiled Python body of a kernel."""
    return getattr(func, "py_func", func)
