"""Fit engines: phase sweeps, Rabi traces, ODMR spectra."""
import numpy as np
import pytest

from qdmsim.constants import GAMMA_E, TWO_PI
from qdmsim.analysis import (damped_gauss_newton, fit_odmr, fit_phase_sweep,
                             fit_phase_sweep_batch, fit_rabi)
from qdmsim.instrument import synth_odmr
from qdmsim.spin import (PhaseSweep, RabiTrace, XYSequence, phase_sweep,
                         simulate_rabi, xyn_kappa)

OMEGA = TWO_PI * 2.7e6


def make_sweep(c0, c, phi, off=0.0, n=25, noise=0.0, seed=0):
    d = np.linspace(-np.pi / 2, np.pi / 2, n)
    s = c0 + c * np.cos(phi * np.cos(d - off))
    if noise:
        s = s + np.random.default_rng(seed).normal(0, noise, n)
    return PhaseSweep(d, s)


class TestGaussNewton:
    def test_quadratic_bowl(self):
        def rj(p):
            r = np.array([p[0] - 3.0, 2.0 * (p[1] + 1.0)])
            jac = np.array([[1.0, 0.0], [0.0, 2.0]])
            return r, jac
        p, cost, conv, _ = damped_gauss_newton(rj, np.zeros(2))
        assert conv
        np.testing.assert_allclose(p, [3.0, -1.0], atol=1e-9)


class TestPhaseSweepFit:
    def test_noiseless_closure(self):
        fit = fit_phase_sweep(make_sweep(0.5, 0.2, 1.2))
        assert fit.c0 == pytest.approx(0.5, abs=1e-8)
        assert fit.c == pytest.approx(0.2, abs=1e-8)
        assert fit.phi_amp == pytest.approx(1.2, abs=1e-8)
        assert fit.delta_offset == pytest.approx(0.0, abs=1e-8)
        assert fit.flags.converged

    def test_offset_recovered(self):
        fit = fit_phase_sweep(make_sweep(0.1, 0.4, 2.2, off=0.12))
        assert fit.phi_amp == pytest.approx(2.2, abs=1e-7)
        assert fit.delta_offset == pytest.approx(0.12, abs=1e-7)

    def test_multi_oscillation_no_aliasing(self):
        # the paper operating point: phi = kappa * 3.5 uT = 5.231 rad
        fit = fit_phase_sweep(make_sweep(0.0, 1.0, 5.2311))
        assert fit.phi_amp == pytest.approx(5.2311, abs=1e-6)

    def test_linearity_in_drive(self):
        phis = []
        for mult in (1.0, 2.0, 4.0):
            fit = fit_phase_sweep(make_sweep(0.4, 0.3, 0.9 * mult,
                                             noise=1e-4, seed=int(mult)))
            phis.append(fit.phi_amp)
        coeffs = np.polyfit([1, 2, 4], phis, 1)
        pred = np.polyval(coeffs, [1, 2, 4])
        ss_res = np.sum((np.array(phis) - pred) ** 2)
        ss_tot = np.sum((np.array(phis) - np.mean(phis)) ** 2)
        assert 1 - ss_res / ss_tot > 0.999

    def test_phi_reported_nonnegative(self):
        fit = fit_phase_sweep(make_sweep(0.0, -0.3, 1.4))
        assert fit.phi_amp >= 0

    def test_covariance_symmetric_psd(self):
        fit = fit_phase_sweep(make_sweep(0.2, 0.5, 2.0, noise=1e-3))
        cov = fit.covariance
        np.testing.assert_allclose(cov, cov.T, rtol=1e-10)
        assert np.all(np.linalg.eigvalsh(cov) > -1e-20)

    def test_requires_eight_samples(self):
        with pytest.raises(ValueError):
            fit_phase_sweep(make_sweep(0, 1, 1, n=6))

    def test_requires_pi_span(self):
        d = np.linspace(-0.5, 0.5, 20)
        with pytest.raises(ValueError):
            fit_phase_sweep(PhaseSweep(d, np.cos(np.cos(d))))

    def test_kappa_converts_to_field(self):
        seq = XYSequence.matched(300e3)
        kappa = xyn_kappa(seq.n_pulses, seq.tau)
        sweep = phase_sweep(seq, 3.5e-6, np.linspace(-np.pi / 2, np.pi / 2,
                                                     25), 0.0, OMEGA)
        fit = fit_phase_sweep(sweep, kappa=kappa)
        assert fit.b_ac == pytest.approx(3.5e-6, rel=1e-6)

    def test_batch_matches_scalar(self):
        d = np.linspace(-np.pi / 2, np.pi / 2, 25)
        rng = np.random.default_rng(3)
        sigs = np.stack([
            0.2 + 0.4 * np.cos(phi * np.cos(d - off))
            + rng.normal(0, 5e-3, d.size)
            for phi, off in ((1.0, 0.05), (3.3, -0.1), (5.2, 0.0))])
        batch = fit_phase_sweep_batch(d, sigs)
        for i in range(3):
            scalar = fit_phase_sweep(PhaseSweep(d, sigs[i]))
            assert batch["phi"][i] == pytest.approx(scalar.phi_amp,
                                                    rel=1e-6)

    def test_monte_carlo_scatter_matches_covariance(self):
        # parameter scatter over repeated draws agrees with the reported
        # covariance within a factor of 1.5
        d = np.linspace(-np.pi / 2, np.pi / 2, 25)
        truth = 0.1 + 0.5 * np.cos(2.4 * np.cos(d))
        rng = np.random.default_rng(7)
        sigma = 5e-3
        phis, sigs_pred = [], []
        for _ in range(120):
            fit = fit_phase_sweep(PhaseSweep(d, truth + rng.normal(
                0, sigma, d.size)))
            phis.append(fit.phi_amp)
            sigs_pred.append(np.sqrt(fit.covariance[2, 2]))
        scatter = np.std(phis)
        pred = np.mean(sigs_pred)
        assert scatter < 1.5 * pred
        assert scatter > pred / 1.5


class TestRabiFit:
    def test_double_cosine_closure(self):
        t = np.linspace(0, 2e-6, 500)
        w1, w2 = TWO_PI * 2.7e6, TWO_PI * 4.0e6
        s = 0.5 - 0.25 * np.cos(w1 * t) * np.exp(-t / 8e-6) \
            - 0.15 * np.cos(w2 * t) * np.exp(-t / 5e-6)
        fit = fit_rabi(RabiTrace(t, s))
        assert fit.omega1 == pytest.approx(w1, rel=1e-6)
        assert fit.omega2 == pytest.approx(w2, rel=1e-6)
        assert fit.a1 == pytest.approx(-0.25, rel=1e-5)
        assert fit.a2 == pytest.approx(-0.15, rel=1e-5)
        assert fit.t1_decay == pytest.approx(8e-6, rel=1e-4)
        assert fit.t2_decay == pytest.approx(5e-6, rel=1e-4)
        assert fit.omega2 >= fit.omega1

    def test_propagated_trace_fastest_component(self):
        t = np.linspace(0, 2e-6, 600)
        fit = fit_rabi(simulate_rabi(OMEGA, TWO_PI * 3e6, t))
        assert fit.omega2 / TWO_PI == pytest.approx(4.036e6, abs=0.05e6)

    def test_eq_consistency_generalized_rabi(self):
        t = np.linspace(0, 2e-6, 600)
        det = TWO_PI * 1.8e6
        fit = fit_rabi(simulate_rabi(OMEGA, det, t))
        assert np.hypot(OMEGA, det) == pytest.approx(fit.omega2, rel=5e-3)

    def test_single_component_fallback_flagged(self):
        t = np.linspace(0, 2e-6, 400)
        fit = fit_rabi(simulate_rabi(OMEGA, 0.0, t))
        assert fit.flags.fallback == "single-cosine"
        assert fit.omega1 == fit.omega2

    def test_hyperfine_doublet_resolved(self):
        from qdmsim.instrument import ExperimentConfig, synth_rabi_trace
        cfg = ExperimentConfig()
        t = np.linspace(0, 2e-6, 600)
        tr = synth_rabi_trace(cfg, 0.0, t, hyperfine=True)
        fit = fit_rabi(tr)
        assert fit.omega1 / TWO_PI == pytest.approx(2.7e6, rel=2e-3)
        assert fit.omega2 / TWO_PI == pytest.approx(
            np.hypot(2.7e6, 3.03e6), rel=5e-3)


class TestOdmrFit:
    def test_round_trip_1mT(self):
        spec = synth_odmr(1e-3)
        fit = fit_odmr(spec)
        assert fit.b_nv == pytest.approx(1e-3, abs=1e-5)
        assert not fit.flags.fallback

    def test_splitting_is_56mhz_per_mT(self):
        spec = synth_odmr(1e-3)
        fit = fit_odmr(spec)
        sep = abs(fit.centers[1] - fit.centers[0])
        assert sep == pytest.approx(56.05e6, rel=1e-3)

    def test_degenerate_flagged(self):
        spec = synth_odmr(0.0)
        fit = fit_odmr(spec)
        assert fit.flags.fallback == "unresolved-dip-pair"
        assert abs(fit.b_nv) < fit.b_sigma

    def test_hyperfine_spectrum_fit(self):
        spec = synth_odmr(1e-3, hyperfine_split=3.03e6)
        fit = fit_odmr(spec)
        assert fit.b_nv == pytest.approx(1e-3, abs=2e-5)

    def test_noisy_monte_carlo(self):
        # 0.8 mT with 1% contrast noise recovered within 10 uT
        errs = []
        for seed in range(100):
            spec = synth_odmr(0.8e-3, noise_sigma=0.01, seed=seed)
            fit = fit_odmr(spec)
            errs.append(fit.b_nv - 0.8e-3)
        assert np.abs(np.mean(errs)) < 3e-6
        assert np.sqrt(np.mean(np.square(errs))) < 10e-6
