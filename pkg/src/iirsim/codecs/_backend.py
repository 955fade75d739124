"""Kernel backend selection.

The compiled extension is used when importable; set ``IIRSIM_PURE_PYTHON=1``
to force the pure-Python fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
if not os.environ.get("IIRSIM_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
else:
    _impl = _pykernels

rc4_ksa = _impl.rc4_ksa
rc4_crypt = _impl.rc4_crypt
visual_encode = _impl.visual_encode
visual_decode = _impl.visual_decode
