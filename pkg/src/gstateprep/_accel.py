"""Numba switch.

Set ``GSTATEPREP_DISABLE_NUMBA=1`` to force the pure-numpy kernels, e.g. for
debugging or on platforms where numba is unavailable.
"""

import os

_flag = os.environ.get("GSTATEPREP_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _flag not in ("", "0", "false", "no")

try:
    if DISABLED_BY_ENV:
        raise ImportError("numba disabled by environment")
    import numba

    HAS_NUMBA = True
except ImportError:
    numba = None
    HAS_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when numba is active, identity decorator otherwise."""
    if HAS_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn
