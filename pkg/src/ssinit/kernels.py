"""Backend selection for the structural kernels.

The compiled extension is used when it was built; set ``SSINIT_PURE_PYTHON=1``
to force the pure-Python implementation.
"""

from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("SSINIT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "cython"

max_matching = _impl.max_matching
strongly_connected = _impl.strongly_connected


def backends() -> dict:
    """All importable backends by name, for tests and benchmarks."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels as compiled
        out["cython"] = compiled
    except ImportError:
        pass
    return out
