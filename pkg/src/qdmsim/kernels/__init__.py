"""Kernel backend selection.

The compiled Cython extension is used when present; the pure-NumPy
implementation is the fallback.  Set QDMSIM_PURE=1 to force the fallback.
"""
import os

from . import pure

if os.environ.get("QDMSIM_PURE", "") not in ("", "0"):
    _impl = pure
else:
    try:
        from . import _fast as _impl
    except ImportError:
        _impl = pure

BACKEND = _impl.BACKEND
cel = _impl.cel
xyn_propagate = _impl.xyn_propagate

OP_FREE = pure.OP_FREE
OP_ROT = pure.OP_ROT
OP_RATE_PULSE = pure.OP_RATE_PULSE
OP_TILT_PULSE = pure.OP_TILT_PULSE
OP_SLICE_PULSE = pure.OP_SLICE_PULSE
