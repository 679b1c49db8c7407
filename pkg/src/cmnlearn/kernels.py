"""Selects the counting-kernel implementation at import time.

The compiled Cython kernel is preferred; the NumPy fallback is used when the
extension is unavailable or ``CMNLEARN_FORCE_NUMPY=1`` is set.  Both expose
``class_counts_kernel`` with identical behaviour (see tests/test_kernels.py
and scripts/bench_kernels.py).
"""

import os

from . import _kernels_py

if os.environ.get("CMNLEARN_FORCE_NUMPY") == "1":
    _impl = _kernels_py
    HAVE_COMPILED = False
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        HAVE_COMPILED = True
    except ImportError:
        _impl = _kernels_py
        HAVE_COMPILED = False

class_counts_kernel = _impl.class_counts_kernel


def backend() -> str:
    """Name of the active kernel backend: ``"compiled"`` or ``"numpy"``."""
    return "compiled" if HAVE_COMPILED else "numpy"
