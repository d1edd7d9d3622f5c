"""Kernel backend selection.

Hot numeric kernels ship in two flavors: numba @njit loops and pure-numpy
fallbacks. The active flavor is chosen once at import time:

* ``PATHFUSION_NUMBA=0`` (or ``off``/``false``) forces the numpy fallback.
* otherwise numba is used whenever it imports cleanly.

Dense matrix products are always delegated to numpy/BLAS; numba never beats
tuned BLAS there, so only loop-shaped kernels are dispatched.
"""

import os

_FLAG = os.environ.get("PATHFUSION_NUMBA", "1").strip().lower()
_WANT_NUMBA = _FLAG not in ("0", "off", "false", "no")

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

# HAS_NUMBA records availability; the flag only decides what gets dispatched,
# so both kernel flavors stay importable for side-by-side timing.
USE_NUMBA = _WANT_NUMBA and HAS_NUMBA


def active_backend() -> str:
    """Name of the kernel backend selected at import time."""
    return "numba" if USE_NUMBA else "numpy"
