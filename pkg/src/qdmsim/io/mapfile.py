"""Binary field-map files.

Layout (all little-endian, independent of host byte order):

    offset  size  field
    0       4     magic "QDM1"
    4       4     version (u32, = 1)
    8       4     width   (u32, pixels)
    12      4     height  (u32, pixels)
    16      8     pixel_size (f64, meters)
    24      8     standoff   (f64, meters)
    32      1     axis code (u8: 0 = NV scalar, 1/2/3 = x/y/z component)
    33      8*W*H payload, f64 row-major from the top-left pixel, tesla

Round trips are bit-identical.
"""
import struct

import numpy as np

from ..magnetics import FieldMap
from .errors import DataError

MAGIC = b"QDM1"
VERSION = 1
_HEADER = struct.Struct("<4sIII d d B")

_AXIS_BY_KIND = {"nv": 0, "x": 1, "y": 2, "z": 3}
_KIND_BY_AXIS = {v: k for k, v in _AXIS_BY_KIND.items()}


def write_map(path, fmap):
    """Serialize a scalar FieldMap."""
    if fmap.kind not in _AXIS_BY_KIND:
        raise ValueError("write_map expects a scalar map "
                         "(save vector maps one component at a time)")
    payload = np.ascontiguousarray(fmap.values, dtype="<f8")
    header = _HEADER.pack(MAGIC, VERSION, fmap.width, fmap.height,
                          fmap.pixel_size, fmap.standoff,
                          _AXIS_BY_KIND[fmap.kind])
    if hasattr(path, "write"):
        path.write(header)
        path.write(payload.tobytes())
        return
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def read_map_from(fh, path="<stream>"):
    """Read one MapFile record from an open binary stream."""
    raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise DataError(f"{path}: truncated header "
                        f"({len(raw)} of {_HEADER.size} bytes)")
    magic, version, width, height, pixel_size, standoff, axis = \
        _HEADER.unpack(raw)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r} (want {MAGIC!r})")
    if version != VERSION:
        raise DataError(f"{path}: unsupported version {version}")
    if width == 0 or height == 0:
        raise DataError(f"{path}: zero width or height")
    if axis not in _KIND_BY_AXIS:
        raise DataError(f"{path}: unknown axis code {axis}")
    if not (pixel_size > 0 and np.isfinite(pixel_size)):
        raise DataError(f"{path}: invalid pixel_size {pixel_size!r}")
    if not np.isfinite(standoff):
        raise DataError(f"{path}: invalid standoff {standoff!r}")
    count = width * height
    payload = fh.read(8 * count)
    if len(payload) < 8 * count:
        raise DataError(f"{path}: payload truncated "
                        f"({len(payload)} of {8 * count} bytes)")
    values = np.frombuffer(payload, dtype="<f8").reshape(height, width)
    if not np.all(np.isfinite(values)):
        raise DataError(f"{path}: payload contains non-finite values")
    return FieldMap(values.astype(np.float64), pixel_size, standoff,
                    _KIND_BY_AXIS[axis])


def read_map(path):
    with open(path, "rb") as fh:
        fmap = read_map_from(fh, str(path))
        if fh.read(1):
            raise DataError(f"{path}: trailing bytes after payload")
    return fmap
