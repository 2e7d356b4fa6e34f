"""Optional numba acceleration.

Set ``PERFSPEC_NO_NUMBA=1`` to force the pure-numpy code paths; the flag is
read once at import time.
"""
from __future__ import annotations

import os

_disabled = os.environ.get("PERFSPEC_NO_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _disabled:
        raise ImportError("numba disabled by PERFSPEC_NO_NUMBA")
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError:
    _njit = None
    HAS_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if HAS_NUMBA:
        return _njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(fn):
        return fn

    return wrap
