"""Select the compiled kernels when available, the pure-Python ones otherwise.

Set ``SUSY_FIELDS_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("SUSY_FIELDS_PURE_PYTHON") == "1":
    kernels = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:
        kernels = _kernels_py
        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
