"""Select the compiled kernels when available, else the numpy fallback.

Set ``RFIDSENSE_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("RFIDSENSE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _fallback

window_stats = _impl.window_stats
adam_update = _impl.adam_update
softmax_xent = _impl.softmax_xent

__all__ = ["BACKEND", "window_stats", "adam_update", "softmax_xent"]
