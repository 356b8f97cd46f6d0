"""Batch evaluation of log|D|, backed by the compiled kernel when available.

Set ``ATIYAH_PURE_PYTHON=1`` to force the numpy fallback.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

if os.environ.get("ATIYAH_PURE_PYTHON", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
batch_eval = _compiled.batch_eval if _compiled is not None else _kernels_py.batch_eval
python_batch_eval = _kernels_py.batch_eval


def log_abs_D(points, real: bool = False) -> float:
    """log|D| of a single configuration given as an ``(n, d)`` array."""
    log_abs, _, _ = batch_eval(np.asarray(points, dtype=float)[None], real)
    return float(log_abs[0])
