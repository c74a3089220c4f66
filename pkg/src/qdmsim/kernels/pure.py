"""Pure-NumPy reference implementations of the hot kernels.

The compiled extension (`qdmsim.kernels._fast`) implements the same two
entry points with identical semantics; `qdmsim.kernels` picks whichever is
available at import time.
"""
import numpy as np

from ..constants import TWO_PI

BACKEND = "pure"

# sequence op codes shared with the compiled kernel
OP_FREE = 0        # f0 = t0, f1 = t1
OP_ROT = 1         # f0 = rotation angle (ideal pulse)
OP_RATE_PULSE = 2  # f0 = width, f1 = center time
OP_TILT_PULSE = 3  # f0 = width, f1 = center time
OP_SLICE_PULSE = 4 # f0 = width, f1 = start time


def cel(kc, p, a, b, tol=1e-10, max_iter=64):
    """Bulirsch's generalized complete elliptic integral cel(kc, p, a, b).

    Vectorized over broadcastable array arguments.  kc = 0 and p = 0 are
    outside the domain and rejected.
    """
    kc, p, a, b = np.broadcast_arrays(
        *(np.asarray(x, dtype=np.float64) for x in (kc, p, a, b)))
    if np.any(kc == 0.0):
        raise ValueError("cel: kc must be nonzero")
    if np.any(p == 0.0):
        raise ValueError("cel: p must be nonzero")

    k = np.abs(kc)
    aa = a.copy()
    bb = b.copy()
    pp = p.copy()

    neg = p < 0
    if np.any(neg):
        f = k[neg] * k[neg]
        q = (1.0 - f) * (bb[neg] - aa[neg] * pp[neg])
        g = 1.0 - pp[neg]
        f = f - pp[neg]
        pp_n = np.sqrt(f / g)
        aa_n = (aa[neg] - bb[neg]) / g
        bb[neg] = -q / (g * g * pp_n) + aa_n * pp_n
        aa[neg] = aa_n
        pp[neg] = pp_n
    pos = ~neg
    pp[pos] = np.sqrt(pp[pos])
    bb[pos] = bb[pos] / pp[pos]

    e = k.copy()
    em = np.ones_like(k)
    active = np.ones(k.shape, dtype=bool)
    for _ in range(max_iter):
        f = aa.copy()
        aa = np.where(active, aa + bb / pp, aa)
        g = np.where(active, e / pp, 0.0)
        bb = np.where(active, 2.0 * (bb + f * g), bb)
        pp = np.where(active, g + pp, pp)
        g = em.copy()
        em = np.where(active, k + em, em)
        done = np.abs(g - k) <= g * tol
        active = active & ~done
        if not active.any():
            break
        k = np.where(active, 2.0 * np.sqrt(e), k)
        e = np.where(active, k * em, e)
    else:
        raise RuntimeError(
            f"cel: {int(active.sum())} element(s) failed to converge "
            f"after {max_iter} iterations")
    return 0.5 * np.pi * (bb + aa * em) / (em * (em + pp))


def _apply(amp0, amp1, u00, u01, u10, u11):
    new0 = u00 * amp0 + u01 * amp1
    new1 = u10 * amp0 + u11 * amp1
    return new0, new1


def _rot(amp0, amp1, phase, angle):
    """Rotation about the equatorial axis at azimuth `phase`."""
    c = np.cos(0.5 * angle)
    s = np.sin(0.5 * angle)
    e = np.exp(-1j * phase)
    return _apply(amp0, amp1, c, -1j * s * e, -1j * s * np.conj(e), c)


def _tilt_u(det, omega, phase, dt):
    """Exact unitary of H = det/2 sz + omega/2 (cos sx + sin sy) for time dt."""
    og = np.hypot(det, omega)
    half = 0.5 * og * dt
    c = np.cos(half)
    # sin(half)/og with the og -> 0 limit dt/2
    s = 0.5 * dt * np.sinc(half / np.pi)
    e = np.exp(-1j * phase)
    u00 = c - 1j * s * det
    u01 = -1j * s * omega * e
    u10 = -1j * s * omega * np.conj(e)
    u11 = c + 1j * s * det
    return u00, u01, u10, u11


def xyn_propagate(op_kind, op_f0, op_f1, op_phase,
                  b_ac, delta, det, omega,
                  w_ac, gamma_pref, include_static, ac_in_pulse, n_slices,
                  amp0=None, amp1=None):
    """Run a compiled XY-N segment program over element arrays.

    All of b_ac, delta, det, omega are 1-D arrays of equal length; returns
    the final (amp0, amp1) complex arrays, starting from |0> unless initial
    amplitudes are supplied.

    gamma_pref is 2*pi*gamma_e; w_ac the AC angular frequency (> 0).
    """
    m = b_ac.shape[0]
    if amp0 is None:
        amp0 = np.ones(m, dtype=np.complex128)
        amp1 = np.zeros(m, dtype=np.complex128)
    ac_pref = gamma_pref * b_ac / w_ac

    def ac_det(t):
        return gamma_pref * b_ac * np.cos(w_ac * t + delta)

    for kind, f0, f1, ph in zip(op_kind, op_f0, op_f1, op_phase):
        if kind == OP_FREE:
            phi = ac_pref * (np.sin(w_ac * f1 + delta) - np.sin(w_ac * f0 + delta))
            if include_static:
                phi = phi + det * (f1 - f0)
            half = np.exp(-0.5j * phi)
            amp0 = amp0 * half
            amp1 = amp1 * np.conj(half)
        elif kind == OP_ROT:
            amp0, amp1 = _rot(amp0, amp1, ph, f0)
        elif kind == OP_RATE_PULSE:
            de = det + ac_det(f1) if ac_in_pulse else det
            angle = np.hypot(omega, de) * f0
            amp0, amp1 = _rot(amp0, amp1, ph, angle)
        elif kind == OP_TILT_PULSE:
            de = det + ac_det(f1) if ac_in_pulse else det
            amp0, amp1 = _apply(amp0, amp1, *_tilt_u(de, omega, ph, f0))
        elif kind == OP_SLICE_PULSE:
            dt = f0 / n_slices
            for j in range(n_slices):
                tm = f1 + (j + 0.5) * dt
                de = det + ac_det(tm) if ac_in_pulse else det
                amp0, amp1 = _apply(amp0, amp1, *_tilt_u(de, omega, ph, dt))
        else:
            raise ValueError(f"unknown op kind {kind}")
    return amp0, amp1
