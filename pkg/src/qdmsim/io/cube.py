"""Phase-sweep data cubes: concatenated per-delta MapFiles plus a
line-oriented text manifest."""
import numpy as np

from ..magnetics import FieldMap
from .errors import DataError
from .mapfile import read_map_from, write_map


def write_cube(path, cube, delta, pixel_size, standoff, meta=None):
    """Store a (D, H, W) cube as back-to-back MapFiles; the manifest goes
    to <path>.manifest."""
    cube = np.asarray(cube, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if cube.shape[0] != delta.size:
        raise ValueError("cube depth must match the delta grid")
    with open(path, "wb") as fh:
        for frame in cube:
            fmap = FieldMap(frame, pixel_size, standoff, "nv")
            import io as _io
            buf = _io.BytesIO()
            write_map(buf, fmap)
            fh.write(buf.getvalue())
    lines = [f"n_frames = {delta.size}"]
    for i, d in enumerate(delta):
        lines.append(f"delta_{i} = {float(d):.17g} rad")
    for key, val in (meta or {}).items():
        if isinstance(val, (float, np.floating)):
            lines.append(f"{key} = {float(val):.17g}")
        else:
            lines.append(f"{key} = {val}")
    with open(str(path) + ".manifest", "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_cube(path):
    """Load a cube; returns (cube, delta, meta)."""
    meta = {}
    try:
        with open(str(path) + ".manifest") as fh:
            for line in fh:
                line = line.strip()
                if not line or "=" not in line:
                    continue
                key, _, val = line.partition("=")
                meta[key.strip()] = val.strip()
    except FileNotFoundError:
        raise DataError(f"{path}: missing manifest {path}.manifest")
    try:
        n = int(meta.pop("n_frames"))
    except (KeyError, ValueError):
        raise DataError(f"{path}.manifest: missing or bad n_frames")
    delta = np.empty(n)
    for i in range(n):
        key = f"delta_{i}"
        if key not in meta:
            raise DataError(f"{path}.manifest: missing {key}")
        delta[i] = float(meta.pop(key).split()[0])
    frames = []
    with open(path, "rb") as fh:
        for i in range(n):
            frames.append(read_map_from(fh, f"{path}[frame {i}]"))
        if fh.read(1):
            raise DataError(f"{path}: trailing bytes after frame {n - 1}")
    cube = np.stack([f.values for f in frames])
    return cube, delta, {"pixel_size": frames[0].pixel_size,
                         "standoff": frames[0].standoff, **meta}
