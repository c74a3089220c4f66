"""Nonlinear least-squares fits: phase sweeps, Rabi traces, ODMR spectra.

All fits run on a small damped Gauss-Newton core with analytic Jacobians,
multi-start initialization over the oscillatory parameter and closed-form
linear parameters per candidate (the sweep model is multimodal in the
accumulated phase).
"""
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..constants import GAMMA_E

MAX_ITER = 200
STEP_TOL = 1e-9
RESTARTS = 8


@dataclass
class FitFlags:
    converged: bool = True
    fallback: str = ""


@dataclass
class PhaseSweepFit:
    """Parameters of S = C0 + C cos(phi_amp cos(delta - delta_offset))."""

    c0: float
    c: float
    phi_amp: float
    delta_offset: float
    covariance: np.ndarray = field(repr=False)
    residual_sigma: float = 0.0
    b_ac: float = None            # phi_amp / kappa, filled when kappa known
    flags: FitFlags = field(default_factory=FitFlags)


@dataclass
class RabiFit:
    """Parameters of the double decaying-cosine Rabi model."""

    a1: float
    a2: float
    omega1: float
    omega2: float
    t1_decay: float
    t2_decay: float
    baseline: float = 0.0
    flags: FitFlags = field(default_factory=FitFlags)


@dataclass
class OdmrFit:
    b_nv: float
    b_sigma: float
    centers: tuple = ()
    linewidth: float = 0.0
    contrast: float = 0.0
    flags: FitFlags = field(default_factory=FitFlags)


def damped_gauss_newton(residual_jac, p0, max_iter=MAX_ITER, tol=STEP_TOL):
    """Levenberg-damped Gauss-Newton minimization of sum(r^2).

    residual_jac(p) -> (r, J).  Returns (p, cost, converged, n_iter).
    """
    p = np.asarray(p0, dtype=float).copy()
    r, jac = residual_jac(p)
    cost = float(r @ r)
    lam = 1e-3
    for it in range(max_iter):
        a = jac.T @ jac
        g = jac.T @ r
        diag = np.clip(np.diag(a), 1e-300, None)
        accepted = False
        for _ in range(16):
            try:
                step = np.linalg.solve(a + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            p_try = p + step
            r_try, j_try = residual_jac(p_try)
            c_try = float(r_try @ r_try)
            if c_try <= cost:
                rel = np.max(np.abs(step) / (np.abs(p) + 1e-12))
                p, r, jac, cost = p_try, r_try, j_try, c_try
                lam = max(lam * 0.3, 1e-12)
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            return p, cost, False, it + 1
        if rel < tol:
            return p, cost, True, it + 1
    return p, cost, False, max_iter


# ---------------------------------------------------------------- phase sweep

def _sweep_design(phi, off, delta):
    return np.cos(phi * np.cos(delta - off))


def _linear_solve_1g(g, s):
    """Closed-form (C0, C) for basis [1, g] against signal s."""
    n = g.size
    sg = g.sum()
    sgg = g @ g
    det = n * sgg - sg * sg
    if det == 0.0:
        return 0.0, 0.0
    b0 = s.sum()
    b1 = g @ s
    c0 = (sgg * b0 - sg * b1) / det
    c = (n * b1 - sg * b0) / det
    return c0, c


def _phase_sweep_grid(delta, signals, phi_max, n_phi=120, n_off=13,
                      off_max=0.45 * np.pi):
    """Vectorized multi-start over (phi, offset); closed-form (C0, C).

    signals: (P, D).  Returns per-pixel best (phi, off, c0, c).
    """
    n_pix, n_d = signals.shape
    s_sum = signals.sum(axis=1)
    best_sse = np.full(n_pix, np.inf)
    best = np.zeros((n_pix, 4))
    ss = np.einsum("pd,pd->p", signals, signals)
    phis = np.linspace(1e-3, phi_max, n_phi)
    offs = np.linspace(-off_max, off_max, n_off)
    for off in offs:
        u = np.cos(delta - off)
        for phi in phis:
            g = np.cos(phi * u)
            n = n_d
            sg = g.sum()
            sgg = g @ g
            det = n * sgg - sg * sg
            if det <= 0.0:
                continue
            b1 = signals @ g
            c0 = (sgg * s_sum - sg * b1) / det
            c = (n * b1 - sg * s_sum) / det
            sse = ss - (c0 * s_sum + c * b1)
            better = sse < best_sse
            if np.any(better):
                best_sse[better] = sse[better]
                best[better, 0] = phi
                best[better, 1] = off
                best[better, 2] = c0[better]
                best[better, 3] = c[better]
    return best, best_sse


def _sweep_residual_jac(delta, s):
    def rj(p):
        c0, c, phi, off = p
        u = np.cos(delta - off)
        su = np.sin(delta - off)
        g = np.cos(phi * u)
        dg = -np.sin(phi * u)
        r = c0 + c * g - s
        jac = np.stack([np.ones_like(g), g, c * dg * u, c * dg * phi * su],
                       axis=1)
        return r, jac
    return rj


def _canonical_sweep_params(p):
    c0, c, phi, off = p
    if phi < 0:
        phi = -phi
    off = (off + 0.5 * np.pi) % np.pi - 0.5 * np.pi
    return np.array([c0, c, phi, off])


def fit_phase_sweep(sweep, kappa=None, phi_max=3 * np.pi):
    """Fit a PhaseSweep to C0 + C cos(phi cos(delta - offset)).

    Requires at least 8 samples spanning at least pi.  phi_amp is reported
    non-negative; when kappa is given, b_ac = phi_amp / kappa.
    """
    delta = np.asarray(sweep.delta, dtype=float)
    s = np.asarray(sweep.signal, dtype=float)
    if delta.size < 8:
        raise ValueError("need at least 8 phase samples")
    if delta.max() - delta.min() < np.pi - 1e-9:
        raise ValueError("phase sweep must span at least pi")

    best, _ = _phase_sweep_grid(delta, s[None, :], phi_max)
    phi0, off0, c00, c0c = best[0, 0], best[0, 1], best[0, 2], best[0, 3]
    rj = _sweep_residual_jac(delta, s)

    starts = [np.array([c00, c0c, phi0, off0])]
    rng_phis = np.linspace(0.25 * phi_max, phi_max, RESTARTS - 1)
    for ph in rng_phis:
        g = _sweep_design(ph, off0, delta)
        c0a, ca = _linear_solve_1g(g, s)
        starts.append(np.array([c0a, ca, ph, off0]))

    best_p, best_cost, best_conv = None, np.inf, False
    for p0 in starts:
        p, cost, conv, _ = damped_gauss_newton(rj, p0)
        if cost < best_cost - 1e-18 or (conv and not best_conv
                                        and cost <= best_cost * (1 + 1e-12)):
            best_p, best_cost, best_conv = p, cost, conv
        if best_conv and best_cost <= 1e-24:
            break
    p = _canonical_sweep_params(best_p)
    if not best_conv:
        warnings.warn("phase-sweep fit did not converge; returning best "
                      "candidate", stacklevel=2)

    r, jac = _sweep_residual_jac(delta, s)(p)
    dof = max(delta.size - 4, 1)
    sig2 = float(r @ r) / dof
    try:
        cov = sig2 * np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        cov = np.full((4, 4), np.nan)
    fit = PhaseSweepFit(
        c0=float(p[0]), c=float(p[1]), phi_amp=float(p[2]),
        delta_offset=float(p[3]), covariance=cov,
        residual_sigma=float(np.sqrt(sig2)),
        flags=FitFlags(converged=best_conv))
    if kappa is not None:
        fit.b_ac = fit.phi_amp / kappa
    return fit


def fit_phase_sweep_batch(delta, signals, phi_max=3 * np.pi, max_iter=60,
                          off_bound=0.25):
    """Vectorized per-pixel sweep fits for data cubes.

    signals: (P, D).  Returns dict of arrays: c0, c, phi, off, sse,
    converged.  Runs the vectorized multi-start grid then a batched damped
    Gauss-Newton refinement.

    off_bound confines the fitted phase offset to [-off_bound, off_bound]
    radians.  Lock-in referenced sweeps have small physical offsets, and
    the sweep model has spurious offset modes a few tenths of a radian out
    that plain maximum-likelihood hops into at realistic noise; the bound
    pins the physical mode.  Pass None to search the full offset range.
    """
    delta = np.asarray(delta, dtype=float)
    signals = np.asarray(signals, dtype=float)
    n_pix, n_d = signals.shape
    n_off = 13 if off_bound is None else max(5, int(13 * off_bound / np.pi))
    best, _ = _phase_sweep_grid(
        delta, signals, phi_max, n_off=n_off,
        off_max=0.45 * np.pi if off_bound is None else off_bound)
    p = best.copy()[:, [2, 3, 0, 1]]  # reorder to (c0, c, phi, off)

    lam = np.full(n_pix, 1e-3)
    active = np.ones(n_pix, dtype=bool)

    def residual_jac(params):
        c0 = params[:, 0:1]
        c = params[:, 1:2]
        phi = params[:, 2:3]
        off = params[:, 3:4]
        u = np.cos(delta[None, :] - off)
        su = np.sin(delta[None, :] - off)
        g = np.cos(phi * u)
        dg = -np.sin(phi * u)
        r = c0 + c * g - signals
        jac = np.stack([np.broadcast_to(np.ones_like(g), g.shape), g,
                        c * dg * u, c * dg * phi * su], axis=2)
        return r, jac

    r, jac = residual_jac(p)
    cost = np.einsum("pd,pd->p", r, r)
    for _ in range(max_iter):
        if not active.any():
            break
        a = np.einsum("pdi,pdj->pij", jac, jac)
        g = np.einsum("pdi,pd->pi", jac, r)
        diag = np.clip(np.einsum("pii->pi", a), 1e-300, None)
        a_d = a + lam[:, None, None] * np.einsum(
            "pi,ij->pij", diag, np.eye(4))
        try:
            step = -np.linalg.solve(a_d, g[..., None])[..., 0]
        except np.linalg.LinAlgError:
            a_d += 1e-9 * np.eye(4)[None]
            step = -np.linalg.solve(a_d, g[..., None])[..., 0]
        p_try = p + np.where(active[:, None], step, 0.0)
        if off_bound is not None:
            p_try[:, 3] = np.clip(p_try[:, 3], -off_bound, off_bound)
        r_try, jac_try = residual_jac(p_try)
        cost_try = np.einsum("pd,pd->p", r_try, r_try)
        improved = active & (cost_try <= cost)
        p[improved] = p_try[improved]
        rel = np.max(np.abs(step) / (np.abs(p) + 1e-12), axis=1)
        lam = np.where(improved, np.maximum(lam * 0.3, 1e-12),
                       np.where(active, lam * 10.0, lam))
        r[improved] = r_try[improved]
        jac[improved] = jac_try[improved]
        cost[improved] = cost_try[improved]
        active = active & ~(improved & (rel < STEP_TOL)) & (lam < 1e12)

    phi = np.abs(p[:, 2])
    off = (p[:, 3] + 0.5 * np.pi) % np.pi - 0.5 * np.pi
    dof = max(n_d - 4, 1)
    return {"c0": p[:, 0], "c": p[:, 1], "phi": phi, "off": off,
            "sse": cost, "sigma": np.sqrt(cost / dof),
            "converged": ~active}


# ----------------------------------------------------------------- Rabi trace

def _rabi_residual_jac(t, s):
    def rj(p):
        b0, a1, a2, w1, w2, g1, g2 = p
        e1 = np.exp(-np.clip(g1, 0, None) * t)
        e2 = np.exp(-np.clip(g2, 0, None) * t)
        c1 = np.cos(w1 * t)
        c2 = np.cos(w2 * t)
        r = b0 + a1 * c1 * e1 + a2 * c2 * e2 - s
        jac = np.stack([
            np.ones_like(t),
            c1 * e1,
            c2 * e2,
            -a1 * t * np.sin(w1 * t) * e1,
            -a2 * t * np.sin(w2 * t) * e2,
            -a1 * t * c1 * e1,
            -a2 * t * c2 * e2,
        ], axis=1)
        return r, jac
    return rj


def _spectral_peaks(t, s, n_peaks=2):
    """Frequencies of the strongest spectral peaks of the detrended trace."""
    dt = t[1] - t[0]
    sd = s - s.mean()
    n_fft = max(4096, 4 * len(t))
    spec = np.abs(np.fft.rfft(sd, n_fft))
    freqs = np.fft.rfftfreq(n_fft, dt)
    spec[0] = 0.0
    order = []
    work = spec.copy()
    for _ in range(n_peaks):
        i = int(np.argmax(work))
        if work[i] <= 0:
            break
        order.append((freqs[i], spec[i]))
        lo = max(0, i - max(2, n_fft // (len(t) * 8)))
        hi = i + max(3, n_fft // (len(t) * 8))
        work[lo:hi] = 0.0
    return order


def fit_rabi(trace):
    """Fit a Rabi trace to a sum of two exponentially decaying cosines
    plus a baseline; omega2 >= omega1 by convention.

    When the second spectral component is unresolved the fit falls back to
    a single decaying cosine (flagged, with omega1 = omega2)."""
    t = np.asarray(trace.times, dtype=float)
    s = np.asarray(trace.population, dtype=float)
    if t.size < 16:
        raise ValueError("Rabi trace too short to fit")
    peaks = _spectral_peaks(t, s)
    if not peaks:
        raise ValueError("no oscillation found in Rabi trace")
    span = t[-1] - t[0]
    g0 = 0.5 / span
    f1 = peaks[0][0]
    two_component = len(peaks) > 1 and peaks[1][1] > 0.1 * peaks[0][1] \
        and abs(peaks[1][0] - f1) > 2.0 / span

    amp = (s.max() - s.min())
    if two_component:
        f2 = peaks[1][0]
        p0 = np.array([s.mean(), -0.5 * amp, -0.25 * amp,
                       2 * np.pi * f1, 2 * np.pi * f2, g0, g0])
        rj = _rabi_residual_jac(t, s)
        p, cost, conv, _ = damped_gauss_newton(rj, p0)
        b0, a1, a2, w1, w2, g1, g2 = p
        if w2 < w1:
            a1, a2, w1, w2, g1, g2 = a2, a1, w2, w1, g2, g1
        return RabiFit(a1, a2, abs(w1), abs(w2), 1.0 / max(g1, 1e-12),
                       1.0 / max(g2, 1e-12), baseline=b0,
                       flags=FitFlags(converged=conv))

    # single-component fallback
    def rj1(p):
        b0, a1, w1, g1 = p
        e1 = np.exp(-np.clip(g1, 0, None) * t)
        c1 = np.cos(w1 * t)
        r = b0 + a1 * c1 * e1 - s
        jac = np.stack([np.ones_like(t), c1 * e1,
                        -a1 * t * np.sin(w1 * t) * e1, -a1 * t * c1 * e1],
                       axis=1)
        return r, jac
    p0 = np.array([s.mean(), -0.5 * amp, 2 * np.pi * f1, g0])
    p, cost, conv, _ = damped_gauss_newton(rj1, p0)
    b0, a1, w1, g1 = p
    return RabiFit(a1, 0.0, abs(w1), abs(w1), 1.0 / max(g1, 1e-12),
                   1.0 / max(g1, 1e-12), baseline=b0,
                   flags=FitFlags(converged=conv, fallback="single-cosine"))


# -------------------------------------------------------------------- ODMR

def _lorentz(f, f0, hwhm):
    return hwhm ** 2 / ((f - f0) ** 2 + hwhm ** 2)


def fit_odmr(spectrum):
    """Zeeman field from the dip-pair separation of an ODMR spectrum.

    Initialization uses the two lowest minima; refinement fits a
    two-Lorentzian-dip model (doublet pairs when the spectrum declares a
    hyperfine splitting).  Unresolved spectra are flagged and returned
    with b_nv near zero and a linewidth-sized uncertainty."""
    f = np.asarray(spectrum.mw_freqs, dtype=float)
    s = np.asarray(spectrum.contrast, dtype=float)
    hf = spectrum.hyperfine_split or 0.0

    order = np.argsort(s)
    f1 = f[order[0]]
    rest = order[np.abs(f[order] - f1) > 2 * spectrum.linewidth]
    resolved = rest.size > 0
    if resolved:
        f2 = f[rest[0]]
        lo, hi = min(f1, f2), max(f1, f2)
    else:
        lo = hi = f1

    def model(p):
        base, depth, c_lo, c_hi, hwhm = p
        dips = np.zeros_like(f)
        for c in (c_lo, c_hi):
            if hf:
                dips += 0.5 * (_lorentz(f, c - 0.5 * hf, hwhm)
                               + _lorentz(f, c + 0.5 * hf, hwhm))
            else:
                dips += _lorentz(f, c, hwhm)
        return base - depth * dips

    scale = np.array([1.0, 1.0, f[-1] - f[0], f[-1] - f[0],
                      max(spectrum.linewidth, 1.0)])

    def rj(p):
        r0 = model(p) - s
        jac = np.empty((f.size, p.size))
        for i in range(p.size):
            h = 1e-7 * scale[i]
            p2 = p.copy()
            p2[i] += h
            jac[:, i] = (model(p2) - s - r0) / h
        return r0, jac

    depth0 = max(s.max() - s.min(), 1e-6)
    p0 = np.array([s.max(), depth0, lo, hi, max(spectrum.linewidth / 2, 1.0)])
    p, cost, conv, _ = damped_gauss_newton(rj, p0, max_iter=100)
    base, depth, c_lo, c_hi, hwhm = p
    sep = abs(c_hi - c_lo)
    b_nv = sep / (2.0 * GAMMA_E)
    dof = max(f.size - 5, 1)
    sigma_s = np.sqrt(cost / dof)
    snr = depth / max(sigma_s, 1e-12)
    b_sigma = (2 * hwhm) / (GAMMA_E * max(snr, 1e-9))
    flags = FitFlags(converged=conv)
    if not resolved or sep < 2 * hwhm:
        flags.fallback = "unresolved-dip-pair"
        b_sigma = max(b_sigma, 2 * hwhm / GAMMA_E)
    return OdmrFit(b_nv=b_nv, b_sigma=b_sigma, centers=(c_lo, c_hi),
                   linewidth=2 * hwhm, contrast=depth, flags=flags)
