"""16-bit grayscale heatmap export (binary PGM) with a sidecar text file
recording the value-to-gray mapping."""
import numpy as np


def write_heatmap(path, values, vmin=None, vmax=None):
    """Write values as a P5 PGM (maxval 65535, big-endian samples per the
    format) mapping vmin -> 0 and vmax -> 65535 linearly."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ValueError("heatmap expects a 2-D array")
    if vmin is None:
        vmin = float(values.min())
    if vmax is None:
        vmax = float(values.max())
    span = vmax - vmin
    if span <= 0:
        gray = np.zeros_like(values)
    else:
        gray = np.clip((values - vmin) / span, 0.0, 1.0)
    pix = np.round(gray * 65535.0).astype(">u2")
    h, w = values.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(pix.tobytes())
    with open(str(path) + ".scale.txt", "w") as fh:
        fh.write(f"gray_0 = {vmin:.17g}\n")
        fh.write(f"gray_65535 = {vmax:.17g}\n")
        fh.write("mapping = linear\n")


def read_heatmap(path):
    """Read back a P5 heatmap and its scale; returns (values, vmin, vmax)."""
    with open(path, "rb") as fh:
        if fh.readline().strip() != b"P5":
            raise ValueError(f"{path}: not a binary PGM")
        dims = fh.readline().split()
        w, h = int(dims[0]), int(dims[1])
        maxval = int(fh.readline())
        if maxval != 65535:
            raise ValueError(f"{path}: expected 16-bit PGM")
        pix = np.frombuffer(fh.read(2 * w * h), dtype=">u2").reshape(h, w)
    vmin = vmax = None
    with open(str(path) + ".scale.txt") as fh:
        for line in fh:
            key, _, val = line.partition("=")
            if key.strip() == "gray_0":
                vmin = float(val)
            elif key.strip() == "gray_65535":
                vmax = float(val)
    values = vmin + (pix.astype(float) / 65535.0) * (vmax - vmin)
    return values, vmin, vmax
