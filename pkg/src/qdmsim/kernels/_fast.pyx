# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: Bulirsch cel and the XY-N segment-program propagator.

Semantics match qdmsim.kernels.pure exactly; tests compare the two.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport M_PI, atan2, cos, fabs, hypot, sin, sqrt

cnp.import_array()

BACKEND = "cython"

DEF OP_FREE = 0
DEF OP_ROT = 1
DEF OP_RATE_PULSE = 2
DEF OP_TILT_PULSE = 3
DEF OP_SLICE_PULSE = 4


cdef inline double _cel_one(double kc, double p, double a, double b,
                            double tol, int max_iter, int* fail) nogil:
    cdef double k = fabs(kc)
    cdef double aa = a, bb = b, pp = p
    cdef double e, em, f, q, g
    cdef int i
    if pp > 0:
        pp = sqrt(pp)
        bb = bb / pp
    else:
        f = k * k
        q = (1.0 - f) * (bb - aa * pp)
        g = 1.0 - pp
        f = f - pp
        pp = sqrt(f / g)
        aa = (aa - bb) / g
        bb = -q / (g * g * pp) + aa * pp
    e = k
    em = 1.0
    for i in range(max_iter):
        f = aa
        aa = aa + bb / pp
        g = e / pp
        bb = 2.0 * (bb + f * g)
        pp = g + pp
        g = em
        em = k + em
        if fabs(g - k) <= g * tol:
            return 0.5 * M_PI * (bb + aa * em) / (em * (em + pp))
        k = 2.0 * sqrt(e)
        e = k * em
    fail[0] += 1
    return 0.5 * M_PI * (bb + aa * em) / (em * (em + pp))


def cel(kc, p, a, b, double tol=1e-10, int max_iter=64):
    """Bulirsch's generalized complete elliptic integral (vectorized)."""
    kc_a, p_a, a_a, b_a = np.broadcast_arrays(
        *(np.asarray(x, dtype=np.float64) for x in (kc, p, a, b)))
    if np.any(kc_a == 0.0):
        raise ValueError("cel: kc must be nonzero")
    if np.any(p_a == 0.0):
        raise ValueError("cel: p must be nonzero")
    shape = kc_a.shape
    cdef cnp.ndarray[cnp.float64_t, ndim=1] kf = np.ascontiguousarray(kc_a).reshape(-1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] pf = np.ascontiguousarray(p_a).reshape(-1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] af = np.ascontiguousarray(a_a).reshape(-1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bf = np.ascontiguousarray(b_a).reshape(-1)
    cdef Py_ssize_t n = kf.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i
    cdef int fail = 0
    with nogil:
        for i in range(n):
            out[i] = _cel_one(kf[i], pf[i], af[i], bf[i], tol, max_iter, &fail)
    if fail:
        raise RuntimeError(
            f"cel: {fail} element(s) failed to converge after {max_iter} iterations")
    return out.reshape(shape)


def xyn_propagate(op_kind, op_f0, op_f1, op_phase,
                  b_ac, delta, det, omega,
                  double w_ac, double gamma_pref,
                  bint include_static, bint ac_in_pulse, int n_slices,
                  amp0=None, amp1=None):
    """Run an XY-N segment program over element arrays (see pure.xyn_propagate)."""
    cdef cnp.ndarray[cnp.int8_t, ndim=1] kind = np.ascontiguousarray(op_kind, dtype=np.int8)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] f0 = np.ascontiguousarray(op_f0, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] f1 = np.ascontiguousarray(op_f1, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] phs = np.ascontiguousarray(op_phase, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bv = np.ascontiguousarray(b_ac, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dv = np.ascontiguousarray(delta, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] detv = np.ascontiguousarray(det, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ov = np.ascontiguousarray(omega, dtype=np.float64)
    cdef Py_ssize_t m = bv.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] a0
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] a1
    if amp0 is None:
        a0 = np.ones(m, dtype=np.complex128)
        a1 = np.zeros(m, dtype=np.complex128)
    else:
        a0 = np.ascontiguousarray(amp0, dtype=np.complex128)
        a1 = np.ascontiguousarray(amp1, dtype=np.complex128)

    cdef Py_ssize_t n_ops = kind.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double ac_pref, phi, c, s, half, de, ang, dt, tm, og, ph
    cdef double complex e, u00, u01, u10, u11, n0, n1, hph
    with nogil:
        for i in range(m):
            for j in range(n_ops):
                ph = phs[j]
                if kind[j] == OP_FREE:
                    ac_pref = gamma_pref * bv[i] / w_ac
                    phi = ac_pref * (sin(w_ac * f1[j] + dv[i]) - sin(w_ac * f0[j] + dv[i]))
                    if include_static:
                        phi = phi + detv[i] * (f1[j] - f0[j])
                    hph = cos(0.5 * phi) - 1j * sin(0.5 * phi)
                    a0[i] = a0[i] * hph
                    a1[i] = a1[i] * (cos(0.5 * phi) + 1j * sin(0.5 * phi))
                    continue
                if kind[j] == OP_ROT:
                    ang = f0[j]
                    c = cos(0.5 * ang)
                    s = sin(0.5 * ang)
                    e = cos(ph) - 1j * sin(ph)
                    u00 = c
                    u01 = -1j * s * e
                    u10 = -1j * s * (cos(ph) + 1j * sin(ph))
                    u11 = c
                elif kind[j] == OP_RATE_PULSE:
                    de = detv[i]
                    if ac_in_pulse:
                        de = de + gamma_pref * bv[i] * cos(w_ac * f1[j] + dv[i])
                    ang = hypot(ov[i], de) * f0[j]
                    c = cos(0.5 * ang)
                    s = sin(0.5 * ang)
                    e = cos(ph) - 1j * sin(ph)
                    u00 = c
                    u01 = -1j * s * e
                    u10 = -1j * s * (cos(ph) + 1j * sin(ph))
                    u11 = c
                elif kind[j] == OP_TILT_PULSE:
                    de = detv[i]
                    if ac_in_pulse:
                        de = de + gamma_pref * bv[i] * cos(w_ac * f1[j] + dv[i])
                    og = hypot(de, ov[i])
                    half = 0.5 * og * f0[j]
                    c = cos(half)
                    if og > 0:
                        s = sin(half) / og
                    else:
                        s = 0.5 * f0[j]
                    e = cos(ph) - 1j * sin(ph)
                    u00 = c - 1j * s * de
                    u01 = -1j * s * ov[i] * e
                    u10 = -1j * s * ov[i] * (cos(ph) + 1j * sin(ph))
                    u11 = c + 1j * s * de
                else:  # OP_SLICE_PULSE
                    dt = f0[j] / n_slices
                    for k in range(n_slices):
                        tm = f1[j] + (k + 0.5) * dt
                        de = detv[i]
                        if ac_in_pulse:
                            de = de + gamma_pref * bv[i] * cos(w_ac * tm + dv[i])
                        og = hypot(de, ov[i])
                        half = 0.5 * og * dt
                        c = cos(half)
                        if og > 0:
                            s = sin(half) / og
                        else:
                            s = 0.5 * dt
                        e = cos(ph) - 1j * sin(ph)
                        u00 = c - 1j * s * de
                        u01 = -1j * s * ov[i] * e
                        u10 = -1j * s * ov[i] * (cos(ph) + 1j * sin(ph))
                        u11 = c + 1j * s * de
                        n0 = u00 * a0[i] + u01 * a1[i]
                        n1 = u10 * a0[i] + u11 * a1[i]
                        a0[i] = n0
                        a1[i] = n1
                    continue
                n0 = u00 * a0[i] + u01 * a1[i]
                n1 = u10 * a0[i] + u11 * a1[i]
                a0[i] = n0
                a1[i] = n1
    return a0, a1
