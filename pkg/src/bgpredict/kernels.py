"""Kernel backend selection.

The Cython extension is used when it was built; otherwise, or when the
environment variable ``BGPREDICT_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the pure-Python versions are used. ``BACKEND`` names the
active one.
"""

import os

from . import _kernels_py as python_backend

_force_python = os.environ.get("BGPREDICT_PURE_PYTHON", "") not in ("", "0")

compiled_backend = None
if not _force_python:
    try:
        from . import _kernels as compiled_backend
    except ImportError:
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if _active is compiled_backend else "python"

iir_first_order = _active.iir_first_order
gaussian_weights = _active.gaussian_weights
classify_batch = _active.classify_batch
