"""Select the kernel implementation at import time.

Set ``PDCONTRACT_PURE_PYTHON=1`` to force the fallback even when the
compiled extension is importable.
"""
import os

from . import _kernels_py

if os.environ.get("PDCONTRACT_PURE_PYTHON", "").strip() not in ("", "0"):
    kernels = _kernels_py
    COMPILED = False
else:
    try:
        from . import _kernels as kernels
        COMPILED = True
    except ImportError:
        kernels = _kernels_py
        COMPILED = False

jacobi_eigh = kernels.jacobi_eigh
rk4_affine = kernels.rk4_affine
