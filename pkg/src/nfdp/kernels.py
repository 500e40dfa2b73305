"""Kernel dispatch: the compiled extension when importable, NumPy otherwise.

Set ``NFDP_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py as python_backend

compiled_backend = None
if os.environ.get("NFDP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._ext import _kernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

output_joint = backend.output_joint
batch_error = backend.batch_error
