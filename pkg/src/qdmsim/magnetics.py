"""Analytic magnetostatics: point dipoles, uniformly magnetized cylinders,
NV-axis projection, field-map synthesis and the stand-off/moment
calibration geometry.

The cylinder field is split into an axial-magnetization part (classic
solenoid-equivalent closed form) and a diametric part (scalar-potential
closed form); both reduce to Bulirsch's `cel`.  Everything is vectorized
over observation points.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np

from .constants import MU0, NV_AXIS, NV_THETA_DEG
from .kernels import cel

# Numerical guards for the cylinder formulas.
_AXIS_SWITCH = 1e-4   # rho/R below which the small-rho series is used
_RIM_EPS = 1e-7       # relative nudge away from rho = R
_EDGE_OFFSET = 1e-9   # m, offset used to average across the edge ring


@dataclass(frozen=True)
class NVFrame:
    """Sensing-axis geometry: B_NV = sqrt(2/3) By + sqrt(1/3) Bz."""

    theta_deg: float = NV_THETA_DEG
    axis_weights: tuple = (0.0, np.sqrt(2.0 / 3.0), np.sqrt(1.0 / 3.0))

    def __post_init__(self):
        w = np.asarray(self.axis_weights)
        if abs(w @ w - 1.0) > 1e-12:
            raise ValueError("axis weights must form a unit vector")


@dataclass
class CylinderMagnet:
    """Uniformly magnetized cylinder (thin disk in this experiment)."""

    center: np.ndarray            # m, 3-vector
    diameter: float               # m
    thickness: float              # m
    moment: np.ndarray            # J/T, 3-vector

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.moment = np.asarray(self.moment, dtype=float)
        if self.diameter <= 0 or self.thickness <= 0:
            raise ValueError("diameter and thickness must be > 0")
        if not np.all(np.isfinite(self.moment / self.volume)):
            raise ValueError("magnetization must be finite")

    @property
    def volume(self):
        return np.pi * (0.5 * self.diameter) ** 2 * self.thickness


@dataclass
class FieldMap:
    """2-D grid of field values with pixel pitch and stand-off metadata.

    Row-major with the origin at the top-left pixel; the pixel (row, col)
    center sits at x = (col - W//2) * pixel_size,
    y = (H//2 - row) * pixel_size, so integer-micron magnet positions fall
    on pixel centers for the default 1 um pitch.
    """

    values: np.ndarray
    pixel_size: float = 1e-6
    standoff: float = 6e-6
    kind: str = "nv"              # "nv" scalar projection or "vector"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        want = 3 if self.kind == "vector" else 2
        if self.values.ndim != want:
            raise ValueError(f"{self.kind} map must have {want} dimensions")
        if self.kind not in ("nv", "vector", "x", "y", "z"):
            raise ValueError(f"unknown map kind {self.kind!r}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("map values must be finite")
        if self.pixel_size <= 0:
            raise ValueError("pixel size must be > 0")

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    def pixel_coords(self):
        """(x, y) arrays of pixel-center coordinates (meters)."""
        h, w = self.values.shape[:2]
        x = (np.arange(w) - w // 2) * self.pixel_size
        y = (h // 2 - np.arange(h)) * self.pixel_size
        return x, y

    def sample(self, x, y):
        """Bilinear sample at physical coordinates (clipped to the grid)."""
        h, w = self.values.shape[:2]
        col = np.clip(np.asarray(x) / self.pixel_size + w // 2, 0, w - 1)
        row = np.clip(h // 2 - np.asarray(y) / self.pixel_size, 0, h - 1)
        c0 = np.clip(np.floor(col).astype(int), 0, w - 2)
        r0 = np.clip(np.floor(row).astype(int), 0, h - 2)
        fc = col - c0
        fr = row - r0
        v = self.values
        return ((1 - fr) * ((1 - fc) * v[r0, c0] + fc * v[r0, c0 + 1])
                + fr * ((1 - fc) * v[r0 + 1, c0] + fc * v[r0 + 1, c0 + 1]))


@dataclass
class StandoffFit:
    """Linear fit of lobe peak-to-peak distance versus stand-off."""

    intercept: float              # m
    slope: float                  # dimensionless
    residual: float               # m, max |fit - data|
    z0_grid: np.ndarray = field(repr=False, default=None)
    pkpk: np.ndarray = field(repr=False, default=None)

    def invert(self, y_pkpk, method="curve"):
        """Stand-off for a measured peak-to-peak distance.

        "curve" interpolates the calibration samples (exact inversion up
        to grid interpolation); "line" inverts the fitted straight line.
        """
        if method == "line":
            return (y_pkpk - self.intercept) / self.slope
        if method == "curve":
            return float(np.interp(y_pkpk, self.pkpk, self.z0_grid))
        raise ValueError(f"unknown inversion method {method!r}")


def nv_projection(b, frame=NVFrame()):
    """Project a field vector (or (..., 3) array) onto the NV axis."""
    b = np.asarray(b, dtype=float)
    w = np.asarray(frame.axis_weights)
    return b @ w


def dipole_field(moment, source, obs):
    """Point-dipole field B = mu0/(4 pi) (3 (m.r^)r^ - m)/r^3.

    obs may be a 3-vector or an (..., 3) array; coincident observation and
    source points are rejected.
    """
    moment = np.asarray(moment, dtype=float)
    r = np.asarray(obs, dtype=float) - np.asarray(source, dtype=float)
    rr = np.einsum("...i,...i->...", r, r)
    if np.any(rr == 0.0):
        raise ValueError("observation point coincides with the dipole")
    mr = r @ moment
    return MU0 / (4 * np.pi) * (
        3.0 * (mr / rr)[..., None] * r - moment) / rr[..., None] ** 1.5


def _kep(n, m):
    """K(m), E(m), Pi(n, m) via cel (m, n are the squared-modulus forms)."""
    kc = np.sqrt(1.0 - m)
    K = cel(kc, np.ones_like(kc), np.ones_like(kc), np.ones_like(kc))
    E = cel(kc, np.ones_like(kc), np.ones_like(kc), kc * kc)
    P = cel(kc, 1.0 - n, np.ones_like(kc), np.ones_like(kc))
    return K, E, P


def _axial_parts(rho, zeta, radius):
    """alpha, beta, kc for the axial (solenoid) closed form."""
    den = np.sqrt(zeta ** 2 + (rho + radius) ** 2)
    alpha = radius / den
    beta = zeta / den
    kc = np.sqrt((zeta ** 2 + (radius - rho) ** 2)
                 / (zeta ** 2 + (radius + rho) ** 2))
    return alpha, beta, kc


def _cylinder_axial(mag_z, radius, half_len, rho, z):
    """B of an axially magnetized cylinder, cylindrical components."""
    b0 = MU0 * mag_z / np.pi
    gam = (radius - rho) / (radius + rho)
    ap, bp, kp = _axial_parts(rho, z + half_len, radius)
    am, bm, km = _axial_parts(rho, z - half_len, radius)
    one = np.ones_like(rho)
    brho = b0 * (ap * cel(kp, one, one, -one) - am * cel(km, one, one, -one))
    bz = b0 * radius / (radius + rho) * (
        bp * cel(kp, gam * gam, one, gam) - bm * cel(km, gam * gam, one, gam))
    return brho, bz


def _diam_terms(rho, zeta, radius, q, c2, e2, n):
    s = np.sqrt(c2 + zeta ** 2)
    m = q / s ** 2
    K, E, P = _kep(n, m)
    a_val = (4.0 * zeta / q) * (s * (K - E) + (e2 / s) * (K - P))
    g_val = (4.0 / s) * ((2.0 / m) * (K - E) - K)
    da_val = (zeta / (radius * rho ** 2 * s)
              * (s ** 2 * E - (2.0 * radius ** 2 + zeta ** 2) * K)
              + zeta * (radius - rho) * (radius ** 2 + rho ** 2)
              / (radius * rho ** 2 * (radius + rho) * s) * P)
    return a_val, g_val, da_val


def _diam_terms_near_axis(rho, zeta, radius, q, c2, e2, n):
    """Small-rho series of the same three terms (removes the 1/rho^2
    cancellation); relative error O((rho/R)^2)."""
    s = np.sqrt(c2 + zeta ** 2)
    m = q / s ** 2
    a_val = (np.pi * zeta / s) * n * (1.0 + 0.375 * m - 0.75 * e2 / c2)
    g_val = np.pi * rho * radius / s ** 3
    return a_val, g_val, a_val / rho


def _cylinder_diametral(mag_x, radius, half_len, rho, phi, z):
    """B of a transversely magnetized cylinder (magnetization along the
    in-plane x' axis); cylindrical components with azimuth from x'."""
    rho = np.where(rho == 0.0, 1e-12 * radius, rho)
    near_rim = np.abs(rho - radius) < _RIM_EPS * radius
    rho = np.where(near_rim,
                   np.where(rho >= radius, radius * (1 + _RIM_EPS),
                            radius * (1 - _RIM_EPS)), rho)
    q = 4.0 * rho * radius
    c2 = (rho + radius) ** 2
    e2 = (rho - radius) ** 2
    n = q / c2
    near = rho < _AXIS_SWITCH * radius

    # evaluate the exact branch with safe arguments, patch the near-axis
    # lanes with the series afterwards
    rho_safe = np.where(near, 0.5 * radius, rho)
    qs = 4.0 * rho_safe * radius
    c2s = (rho_safe + radius) ** 2
    e2s = (rho_safe - radius) ** 2
    ns = qs / c2s
    ap, gp, dap = _diam_terms(rho_safe, z + half_len, radius, qs, c2s, e2s, ns)
    am, gm, dam = _diam_terms(rho_safe, z - half_len, radius, qs, c2s, e2s, ns)
    if np.any(near):
        for zeta, slot in ((z + half_len, 0), (z - half_len, 1)):
            av, gv, dav = _diam_terms_near_axis(rho, zeta, radius, q, c2, e2, n)
            if slot == 0:
                ap = np.where(near, av, ap)
                gp = np.where(near, gv, gp)
                dap = np.where(near, dav, dap)
            else:
                am = np.where(near, av, am)
                gm = np.where(near, gv, gm)
                dam = np.where(near, dav, dam)

    j_val = ap - am
    dj_drho = dap - dam
    dj_dz = gp - gm
    pref = mag_x * radius / (4.0 * np.pi)
    hrho = -pref * np.cos(phi) * dj_drho
    hphi = pref * np.sin(phi) * j_val / rho
    hz = -pref * np.cos(phi) * dj_dz
    bx = MU0 * (hrho * np.cos(phi) - hphi * np.sin(phi))
    by = MU0 * (hrho * np.sin(phi) + hphi * np.cos(phi))
    bz = MU0 * hz
    inside = (rho < radius) & (np.abs(z) < half_len)
    bx = np.where(inside, bx + MU0 * mag_x, bx)
    return bx, by, bz


def _cylinder_field_local(moment, radius, half_len, x, y, z):
    """Field of a cylinder centered at the origin, moment in J/T."""
    volume = np.pi * radius ** 2 * 2 * half_len
    bx = np.zeros_like(x)
    by = np.zeros_like(x)
    bz = np.zeros_like(x)
    if moment[2] != 0.0:
        rho = np.hypot(x, y)
        az = np.arctan2(y, x)
        brho, bzz = _cylinder_axial(moment[2] / volume, radius, half_len, rho, z)
        bx += brho * np.cos(az)
        by += brho * np.sin(az)
        bz += bzz
    m_perp = np.hypot(moment[0], moment[1])
    if m_perp != 0.0:
        ca = moment[0] / m_perp
        sa = moment[1] / m_perp
        xp = ca * x + sa * y
        yp = -sa * x + ca * y
        rho = np.hypot(xp, yp)
        az = np.arctan2(yp, xp)
        bxp, byp, bzp = _cylinder_diametral(
            m_perp / volume, radius, half_len, rho, az, z)
        bx += ca * bxp - sa * byp
        by += sa * bxp + ca * byp
        bz += bzp
    return np.stack([bx, by, bz], axis=-1)


def cylinder_field(magnet, obs):
    """Stray field of a uniformly magnetized cylinder at obs (3-vector or
    (..., 3) array of points), in tesla.

    Points on the edge ring are evaluated as the average of 1 nm
    inward/outward radial offsets; in-body evaluation is permitted but
    flagged with a warning.
    """
    obs = np.asarray(obs, dtype=float)
    rel = obs - magnet.center
    x, y, z = np.moveaxis(rel, -1, 0)
    radius = 0.5 * magnet.diameter
    half_len = 0.5 * magnet.thickness

    rho = np.hypot(x, y)
    on_ring = (np.abs(rho - radius) < _EDGE_OFFSET) \
        & (np.abs(np.abs(z) - half_len) < _EDGE_OFFSET)
    inside = (rho < radius) & (np.abs(z) < half_len)
    if np.any(inside):
        warnings.warn("cylinder_field evaluated inside the magnet body",
                      stacklevel=2)
    out = _cylinder_field_local(magnet.moment, radius, half_len, x, y, z)
    if np.any(on_ring):
        warnings.warn("cylinder_field evaluated on the edge ring; using the "
                      "1 nm offset average", stacklevel=2)
        scale_in = (radius - _EDGE_OFFSET) / np.where(rho == 0, 1.0, rho)
        scale_out = (radius + _EDGE_OFFSET) / np.where(rho == 0, 1.0, rho)
        b_in = _cylinder_field_local(
            magnet.moment, radius, half_len, x * scale_in, y * scale_in, z)
        b_out = _cylinder_field_local(
            magnet.moment, radius, half_len, x * scale_out, y * scale_out, z)
        out = np.where(on_ring[..., None], 0.5 * (b_in + b_out), out)
    return out


def synth_field_map(magnets, width=70, height=70, pixel_size=1e-6,
                    standoff=6e-6, kind="nv", frame=NVFrame()):
    """Per-pixel superposition of cylinder fields over the sensing plane
    z = -standoff (magnet plane at z = 0); linear in each moment."""
    if standoff <= 0:
        raise ValueError("standoff must be > 0")
    x = (np.arange(width) - width // 2) * pixel_size
    y = (height // 2 - np.arange(height)) * pixel_size
    xx, yy = np.meshgrid(x, y)
    obs = np.stack([xx, yy, np.full_like(xx, -standoff)], axis=-1)
    total = np.zeros_like(obs)
    half_x = 0.5 * width * pixel_size
    half_y = 0.5 * height * pixel_size
    for mag in magnets:
        if abs(mag.center[0]) > half_x or abs(mag.center[1]) > half_y:
            warnings.warn("magnet footprint outside the map grid",
                          stacklevel=2)
        total += cylinder_field(mag, obs)
    if kind == "vector":
        return FieldMap(total, pixel_size, standoff, "vector")
    return FieldMap(nv_projection(total, frame), pixel_size, standoff, "nv")


def _refine_extremum(pos, val, idx):
    """3-point quadratic refinement of a grid extremum."""
    if idx == 0 or idx == len(val) - 1:
        return pos[idx], val[idx]
    f0, f1, f2 = val[idx - 1], val[idx], val[idx + 1]
    denom = f0 - 2.0 * f1 + f2
    if denom == 0.0:
        return pos[idx], val[idx]
    step = pos[1] - pos[0]
    shift = 0.5 * (f0 - f2) / denom
    return pos[idx] + shift * step, f1 - 0.25 * (f0 - f2) * shift


def linecut_peak_to_peak(fmap, center, axis_angle=np.pi / 2, half_span=None):
    """Distance and chord slope between the signed extrema of a line-cut.

    The cut runs through `center` (x, y) along `axis_angle` (default +y,
    the in-plane magnetization axis), sampled at the map's own pixel pitch
    with bilinear interpolation; extremum locations are refined with a
    local quadratic fit.

    Returns {"y_pkpk": m, "slope": T/m, "positions": (m, m),
    "values": (T, T)}.
    """
    if fmap.kind != "nv":
        raise ValueError("line-cut expects a scalar NV-projection map")
    step = fmap.pixel_size
    if half_span is None:
        half_span = 0.5 * min(fmap.width, fmap.height) * step
    s = np.arange(-half_span, half_span + 0.5 * step, step)
    xs = center[0] + s * np.cos(axis_angle)
    ys = center[1] + s * np.sin(axis_angle)
    # keep the cut inside the sampled grid (no clipped-edge plateaus)
    x_lo = -(fmap.width // 2) * step
    x_hi = (fmap.width - 1 - fmap.width // 2) * step
    y_lo = -(fmap.height - 1 - fmap.height // 2) * step
    y_hi = (fmap.height // 2) * step
    keep = (xs >= x_lo) & (xs <= x_hi) & (ys >= y_lo) & (ys <= y_hi)
    if keep.sum() < 5:
        raise ValueError("line-cut window lies outside the map")
    s, xs, ys = s[keep], xs[keep], ys[keep]
    prof = fmap.sample(xs, ys)
    imax = int(np.argmax(prof))
    imin = int(np.argmin(prof))
    if prof[imax] <= 0.0 or prof[imin] >= 0.0:
        raise ValueError("line-cut has no opposite-sign extremum pair "
                         "(stand-off too large for the field of view?)")
    if imax in (0, len(s) - 1) or imin in (0, len(s) - 1):
        raise ValueError("line-cut extremum fell on the window edge")
    p_hi, v_hi = _refine_extremum(s, prof, imax)
    p_lo, v_lo = _refine_extremum(s, prof, imin)
    dist = abs(p_hi - p_lo)
    slope = (v_hi - v_lo) / (p_hi - p_lo)
    return {"y_pkpk": dist, "slope": slope,
            "positions": (p_lo, p_hi), "values": (v_lo, v_hi)}


def _calibration_cut(diameter, thickness, moment, z0, pixel_size,
                     moment_axis=np.array([0.0, 1.0, 0.0]), half_span=None):
    """Line-cut of a single synthetic magnet along its in-plane moment
    axis, sampled exactly like a map-based measurement."""
    if half_span is None:
        half_span = max(4.0 * z0 + 2.0 * diameter, 12e-6)
    # keep the sample lattice in phase with map pixel centers
    half_span = np.ceil(half_span / pixel_size) * pixel_size
    mag = CylinderMagnet(np.zeros(3), diameter, thickness,
                         moment * np.asarray(moment_axis, dtype=float))
    s = np.arange(-half_span, half_span + 0.5 * pixel_size, pixel_size)
    obs = np.stack([np.zeros_like(s), s, np.full_like(s, -z0)], axis=-1)
    prof = nv_projection(cylinder_field(mag, obs))
    return s, prof


def _cut_pkpk(s, prof):
    imax = int(np.argmax(prof))
    imin = int(np.argmin(prof))
    p_hi, v_hi = _refine_extremum(s, prof, imax)
    p_lo, v_lo = _refine_extremum(s, prof, imin)
    return abs(p_hi - p_lo), (v_hi - v_lo) / (p_hi - p_lo)


def standoff_calibration(diameter, reference_moment, z0_grid,
                         thickness=30e-9, pixel_size=1e-6):
    """Least-squares line through the peak-to-peak distance versus
    stand-off for a synthetic reference magnet."""
    z0_grid = np.asarray(z0_grid, dtype=float)
    if z0_grid.size < 4:
        raise ValueError("need at least 4 calibration stand-offs")
    pk = np.empty_like(z0_grid)
    for i, z0 in enumerate(z0_grid):
        s, prof = _calibration_cut(diameter, thickness, reference_moment,
                                   z0, pixel_size)
        pk[i], _ = _cut_pkpk(s, prof)
    slope, intercept = np.polyfit(z0_grid, pk, 1)
    resid = np.abs(pk - (slope * z0_grid + intercept)).max()
    return StandoffFit(float(intercept), float(slope), float(resid),
                       z0_grid=z0_grid, pkpk=pk)


def reference_slope(diameter, thickness, moment, standoff, pixel_size=1e-6):
    """Chord slope of the reference magnet's line-cut at a given geometry."""
    s, prof = _calibration_cut(diameter, thickness, moment, standoff,
                               pixel_size)
    _, slope = _cut_pkpk(s, prof)
    return slope


def moment_from_slope(slope, standoff, diameter, thickness,
                      reference_moment=100e-15, pixel_size=1e-6):
    """Moment magnitude from a measured line-cut chord slope.

    The reference slope is synthesized on the fly at the same geometry and
    sampling, so the scaling is a pure linearity closure.
    """
    if standoff <= 0:
        raise ValueError("standoff must be > 0")
    ref = reference_slope(diameter, thickness, reference_moment, standoff,
                          pixel_size)
    return abs(slope / ref) * reference_moment
