"""Backend selection for the block-level kernels.

The compiled extension is used when it imported cleanly; set
``XTSTROJAN_PURE_PYTHON=1`` to force the pure-Python fallback.
"""

import os

from . import _pykernels

if os.environ.get("XTSTROJAN_PURE_PYTHON"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

encrypt_block = _impl.encrypt_block
decrypt_block = _impl.decrypt_block
ms_forward = _impl.ms_forward
ms_inverse = _impl.ms_inverse
mul_alpha_pow = _impl.mul_alpha_pow
xts_sector = _impl.xts_sector
recover_units = _impl.recover_units


def available_backends():
    """Map backend name to kernel module for every backend that imports."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        found["cython"] = _ckernels
    return found
