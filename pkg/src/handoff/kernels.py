"""Kernel backend selection.

The compiled module is used when it imports; set ``HANDOFF_PURE_PYTHON=1``
to force the numpy fallback.
"""

import os

from . import _kernels_py

if os.environ.get("HANDOFF_PURE_PYTHON"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
        BACKEND = "python"

value_iteration = _impl.value_iteration
simulate_block = _impl.simulate_block


def backends() -> dict:
    """All importable backends by name (for benchmarks and equivalence tests)."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels

        out["cython"] = _kernels
    except ImportError:
        pass
    return out
