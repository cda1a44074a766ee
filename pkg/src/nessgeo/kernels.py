"""Kernel selection: compiled extension when importable, NumPy fallback otherwise.

Set ``NESSGEO_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _rk4_py

BACKEND = "python"
rk4_chunk = _rk4_py.rk4_chunk

if os.environ.get("NESSGEO_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._rk4 import rk4_chunk  # noqa: F811
    except ImportError:
        pass
    else:
        BACKEND = "cython"


def get_rk4(backend=None):
    """Return the RK4 chunk kernel for ``backend`` ('cython', 'python' or None for default)."""
    if backend is None:
        return rk4_chunk
    if backend == "python":
        return _rk4_py.rk4_chunk
    if backend == "cython":
        from ._rk4 import rk4_chunk as compiled

        return compiled
    raise ValueError(f"unknown backend {backend!r}")
