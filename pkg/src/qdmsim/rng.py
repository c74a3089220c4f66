"""Deterministic counter-based random numbers.

A splitmix-style 64-bit generator: every draw is a pure function of
(seed, stream label, pixel index, draw index) through an avalanche mix,
so outputs are identical on every platform and for any worker layout.
"""
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_PRIME_ROW = np.uint64(0x9E3779B97F4A7C15)
_PRIME_COL = np.uint64(0xC2B2AE3D27D4EB4F)
_PRIME_STREAM = np.uint64(0xD6E8FEB86659FD93)

_U64 = np.uint64
_SHIFT30 = _U64(30)
_SHIFT27 = _U64(27)
_SHIFT31 = _U64(31)
_SHIFT11 = _U64(11)


def _mix(z):
    """splitmix64 finalizer (avalanche); wraps modulo 2**64."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _SHIFT30)) * _MIX1
        z = (z ^ (z >> _SHIFT27)) * _MIX2
        return z ^ (z >> _SHIFT31)


def stream_key(seed, *labels):
    """Derive a stream key from a seed and integer labels."""
    with np.errstate(over="ignore"):
        key = _mix(_U64(seed) + _GOLDEN)
        for lab in labels:
            key = _mix(key ^ (_U64(lab) * _PRIME_STREAM + _GOLDEN))
    return key


def uniforms(key, counters):
    """Uniform (0, 1) doubles at the given counter indices."""
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        bits = _mix(_U64(key) + (c + _U64(1)) * _GOLDEN)
    return ((bits >> _SHIFT11).astype(np.float64) + 0.5) * 2.0 ** -53


def normals(key, counters):
    """Standard normal draws at the given counter indices (Box-Muller;
    each draw consumes an independent pair of uniforms)."""
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        u1 = uniforms(key, c * _U64(2))
        u2 = uniforms(key, c * _U64(2) + _U64(1))
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def pixel_normals(seed, label, shape, n_per_pixel=1):
    """Per-pixel standard normals for a (H, W) grid.

    Each pixel owns an independent stream keyed by (seed, label, row,
    col); the result is identical regardless of evaluation order or
    chunking.  Returns shape (H, W) for n_per_pixel == 1 else
    (n_per_pixel, H, W).
    """
    h, w = shape
    rows = np.arange(h, dtype=np.uint64)[:, None]
    cols = np.arange(w, dtype=np.uint64)[None, :]
    base = stream_key(seed, label)
    with np.errstate(over="ignore"):
        keys = _mix(base ^ (rows * _PRIME_ROW) ^ (cols * _PRIME_COL))
    out = np.empty((n_per_pixel, h, w))
    for j in range(n_per_pixel):
        out[j] = normals(keys, np.full((h, w), j))
    return out[0] if n_per_pixel == 1 else out
