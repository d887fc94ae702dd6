"""Kernel backend selection.

The compiled extension is used when it imports; set ``MSNAR_PURE_PYTHON=1``
to force the pure-Python twins (useful for cross-checks and benchmarks).
"""

from __future__ import annotations

import os

if os.environ.get("MSNAR_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as kernels
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        from . import _kernels_py as kernels

BACKEND: str = kernels.BACKEND

__all__ = ["kernels", "BACKEND"]
