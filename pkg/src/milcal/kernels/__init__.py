"""Kernel backend selection.

The compiled Cython extension is preferred when importable; otherwise the
pure-NumPy fallback is used. Override with the MILCAL_KERNELS environment
variable: "python" forces the fallback, "compiled" requires the extension
and raises ImportError when it is missing.
"""

import os

from . import numpy_backend
from .numpy_backend import mi_from_counts

_choice = os.environ.get("MILCAL_KERNELS", "auto").lower()
if _choice in ("python", "numpy"):
    _impl = numpy_backend
elif _choice in ("compiled", "cython"):
    from . import _ckern as _impl
elif _choice == "auto":
    try:
        from . import _ckern as _impl
    except ImportError:
        _impl = numpy_backend
else:
    raise ImportError(f"unrecognized MILCAL_KERNELS value: {_choice!r}")

BACKEND = "python" if _impl is numpy_backend else "compiled"

project_points = _impl.project_points
project_pullback = _impl.project_pullback
sample_labels = _impl.sample_labels
sample_labels_pullback = _impl.sample_labels_pullback
mi_score_map = _impl.mi_score_map

__all__ = [
    "BACKEND",
    "mi_from_counts",
    "mi_score_map",
    "numpy_backend",
    "project_points",
    "project_pullback",
    "sample_labels",
    "sample_labels_pullback",
]
