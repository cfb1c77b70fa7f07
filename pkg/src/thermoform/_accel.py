"""Optional numba acceleration.

Set ``THERMOFORM_NUMBA=0`` to force the pure-numpy kernels; any other value
(or leaving it unset) uses numba when it can be imported.
``THERMOFORM_THREADS`` caps the numba thread pool.
"""

import os
import warnings

# the bundled TBB is too old for numba; skip probing it
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

_flag = os.environ.get("THERMOFORM_NUMBA", "1").strip().lower()
_want_numba = _flag not in ("0", "false", "no", "off")

try:
    if not _want_numba:
        raise ImportError("disabled by THERMOFORM_NUMBA")
    import numba
    from numba import njit, prange

    USE_NUMBA = True
except ImportError as exc:  # pragma: no cover - depends on environment
    USE_NUMBA = False
    prange = range
    if _want_numba:
        warnings.warn(f"numba unavailable ({exc}); using numpy kernels")

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func

        return decorator


def set_threads(n=None):
    """Apply a thread count from ``n`` or ``THERMOFORM_THREADS``."""
    if n is None:
        env = os.environ.get("THERMOFORM_THREADS")
        n = int(env) if env else None
    if n and USE_NUMBA:
        numba.set_num_threads(min(int(n), numba.config.NUMBA_NUM_THREADS))
    return n


def backend():
    return "numba" if USE_NUMBA else "numpy"
