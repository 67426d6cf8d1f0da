"""Hot data-movement kernels with a compiled core and a numpy fallback.

The compiled Cython extension is preferred when importable; set
``HATR_KERNELS=python`` to force the numpy reference implementation.
Both backends expose the same four functions; results are bit-identical
except col2im, whose scatter-add summation order differs (round-off only).
"""

import os

from . import pyref

if os.environ.get("HATR_KERNELS", "").strip().lower() == "python":
    _impl = pyref
else:
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = pyref

BACKEND = _impl.BACKEND
im2col = _impl.im2col
col2im = _impl.col2im
maxpool2_forward = _impl.maxpool2_forward
maxpool2_backward = _impl.maxpool2_backward

__all__ = [
    "BACKEND",
    "im2col",
    "col2im",
    "maxpool2_forward",
    "maxpool2_backward",
    "pyref",
]
