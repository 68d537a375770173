"""Hot loops with a numba backend and a pure-numpy fallback.

The backend is picked once at import time. Set ``FRANSON_BACKEND=numpy`` to
force the fallback; the default is numba when it can be imported.
"""

import os

from . import _numpy

numpy_impl = _numpy
numba_impl = None

BACKEND = os.environ.get("FRANSON_BACKEND", "numba").strip().lower()
if BACKEND not in ("numba", "numpy"):
    raise ImportError(f"FRANSON_BACKEND must be 'numba' or 'numpy', got {BACKEND!r}")

if BACKEND == "numba":
    try:
        from . import _numba
        numba_impl = _numba
    except ImportError:
        BACKEND = "numpy"

_impl = numba_impl if BACKEND == "numba" else numpy_impl

cos_sums = _impl.cos_sums
window_histogram = _impl.window_histogram
pair_nearest = _impl.pair_nearest
bin2d = _impl.bin2d


def set_threads(n):
    """Limit the worker threads used by parallel kernels (numba only)."""
    if n is None:
        return
    if int(n) < 1:
        raise ValueError("thread count must be >= 1")
    if _impl is numba_impl:
        numba_impl.set_threads(n)
