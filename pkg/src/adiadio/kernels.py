"""Propagation backend selection.

The compiled extension is preferred when importable; ADIADIO_PURE_PYTHON=1
forces the NumPy fallback (useful for benchmarking and for debugging the
kernel against its reference twin).  Both expose the same propagate()
contract, documented in _propagate_py.
"""
from __future__ import annotations

import os

from . import _propagate_py

__all__ = ["propagate", "BACKEND", "backend_info"]

BACKEND = "python"
propagate = _propagate_py.propagate

if os.environ.get("ADIADIO_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _propagate as _compiled
    except ImportError:
        pass
    else:
        BACKEND = "compiled"
        propagate = _compiled.propagate


def backend_info() -> dict:
    return {"backend": BACKEND, "forced_pure_python":
            os.environ.get("ADIADIO_PURE_PYTHON", "") in ("1", "true", "yes")}
