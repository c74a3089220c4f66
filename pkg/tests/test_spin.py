"""Spin dynamics: propagator, free evolution, XY-N readout, Rabi."""
import numpy as np
import pytest

from qdmsim.constants import GAMMA_E, TWO_PI
from qdmsim.spin import (ACFieldSpec, ControlPulse, PhaseSweep, SpinState,
                         XYSequence, analytic_xyn_phase, free_evolution_phase,
                         phase_sweep, propagate_pulse, run_xyn, simulate_rabi,
                         xyn_kappa, xyn_readout_batch, xyn_signal_model)

OMEGA = TWO_PI * 2.7e6
F_AC = 300e3


def seq_zero_width(n=8):
    return XYSequence.matched(F_AC, n_pulses=n, order=8)


def seq_finite(n=8):
    return XYSequence.matched(F_AC, n_pulses=n, order=8, rabi_omega=OMEGA)


class TestSpinState:
    def test_normalization_enforced(self):
        with pytest.raises(ValueError):
            SpinState(1.0, 1.0)
        SpinState(np.sqrt(0.5), np.sqrt(0.5) * 1j)

    def test_ground(self):
        g = SpinState.ground()
        assert g.p0 == 1.0 and g.p1 == 0.0


class TestPropagatePulse:
    def test_resonant_pi_pulse_inverts(self):
        pulse = ControlPulse(OMEGA, 0.0, 0.0, np.pi / OMEGA)
        out = propagate_pulse(SpinState.ground(), pulse)
        assert out.p1 == pytest.approx(1.0, abs=1e-12)

    def test_zero_duration_is_identity(self):
        state = SpinState(0.6, 0.8j)
        out = propagate_pulse(state, ControlPulse(OMEGA, 1.0, 2e6, 0.0))
        assert out.amp0 == state.amp0 and out.amp1 == state.amp1

    def test_detuned_pi_pulse_reaches_090(self):
        # drive at 2.7 MHz detuned by 0.9 MHz only lifts the spin to ~0.9
        det = TWO_PI * 0.9e6
        pulse = ControlPulse(OMEGA, 0.0, det, np.pi / OMEGA)
        out = propagate_pulse(SpinState.ground(), pulse)
        og = np.hypot(OMEGA, det)
        want = (OMEGA / og) ** 2 * np.sin(og * pulse.duration / 2) ** 2
        assert out.p1 == pytest.approx(want, abs=1e-12)
        assert out.p1 == pytest.approx(0.90, abs=0.01)

    def test_unitarity_random_trains(self):
        rng = np.random.default_rng(11)
        state = SpinState.ground()
        for _ in range(60):
            pulse = ControlPulse(rng.uniform(0, 3e7),
                                 rng.uniform(0, 2 * np.pi),
                                 rng.uniform(-2e7, 2e7),
                                 rng.uniform(0, 2e-6))
            state = propagate_pulse(state, pulse)
            norm = state.p0 + state.p1
            assert abs(norm - 1.0) < 1e-12


class TestFreeEvolution:
    def test_full_period_integrates_to_zero(self):
        ac = ACFieldSpec(1e-6, 250e3, 0.0)
        phi = free_evolution_phase(ac, 0.0, 0.0, 2e-6)
        assert phi == pytest.approx(0.0, abs=1e-12)

    def test_dc_only(self):
        ac = ACFieldSpec(0.0, 1e5, 0.0)
        assert free_evolution_phase(ac, 1e6, 0.0, 3e-6) == pytest.approx(3.0)

    def test_against_quadrature_oracle(self):
        from scipy.integrate import quad
        ac = ACFieldSpec(3.5e-6, 300e3, 0.0)
        tau = 1.0 / (2 * 300e3)
        got = free_evolution_phase(ac, 0.0, 0.0, tau / 2)

        def integrand(t):
            return TWO_PI * GAMMA_E * ac.amplitude * np.cos(
                TWO_PI * ac.frequency * t)
        want, err = quad(integrand, 0.0, tau / 2, epsabs=1e-13)
        assert got == pytest.approx(want, abs=1e-9)

    def test_reversed_interval_rejected(self):
        with pytest.raises(ValueError):
            free_evolution_phase(ACFieldSpec(1e-6, 1e5), 0.0, 1e-6, 0.0)


class TestAnalyticPhase:
    def test_paper_operating_point(self):
        tau = 1.0 / (2 * F_AC)
        phi = analytic_xyn_phase(3.5e-6, 0.0, 8, tau)
        assert phi == pytest.approx(5.23115, abs=2e-4)
        assert xyn_kappa(8, tau) == pytest.approx(1.49461e6, rel=1e-4)

    def test_quadrature_phase_vanishes(self):
        assert analytic_xyn_phase(2e-6, np.pi / 2, 8, 1e-6) == \
            pytest.approx(0.0, abs=1e-12)

    def test_xy4_point(self):
        kappa = xyn_kappa(4, 2.5e-6)
        assert kappa * 1e-6 == pytest.approx(1.1210, abs=2e-4)
        assert analytic_xyn_phase(1e-6, 0.0, 4, 2.5e-6) == \
            pytest.approx(1.1210, abs=2e-4)


class TestSignalModel:
    def test_constant_for_zero_phase(self):
        d = np.linspace(-1, 1, 7)
        out = xyn_signal_model({"C0": 0.0, "C": 1.0, "kappaB": 0.0}, d)
        np.testing.assert_allclose(out, 1.0)

    def test_amplitude_derivative_matches_finite_difference(self):
        # dS/dB = -C kappa sin(kappa B cos d) cos d
        kappa = xyn_kappa(8, 1.0 / (2 * F_AC))
        c, b = 0.8, 2.1e-6
        for d in (0.0, 0.4, -1.1):
            h = 1e-12
            fd = (xyn_signal_model({"C0": 0.1, "C": c,
                                    "kappaB": kappa * (b + h)}, d)
                  - xyn_signal_model({"C0": 0.1, "C": c,
                                      "kappaB": kappa * (b - h)}, d)) / (2 * h)
            want = -c * kappa * np.sin(kappa * b * np.cos(d)) * np.cos(d)
            assert fd == pytest.approx(want, rel=1e-3)

    def test_phase_derivative_matches_finite_difference(self):
        # dS/dd = C kappa B sin(kappa B cos d) sin d
        kappa = xyn_kappa(8, 1.0 / (2 * F_AC))
        c, b = 0.7, 1.4e-6
        for d in (0.3, 1.2, np.pi / 2 - 1e-4):
            h = 1e-7
            p = {"C0": 0.0, "C": c, "kappaB": kappa * b}
            fd = (xyn_signal_model(p, d + h)
                  - xyn_signal_model(p, d - h)) / (2 * h)
            want = c * kappa * b * np.sin(kappa * b * np.cos(d)) * np.sin(d)
            assert fd == pytest.approx(want, rel=1e-5, abs=1e-9)


class TestRunXYN:
    def test_no_field_gives_unity(self):
        ac = ACFieldSpec(1e-30, F_AC, 0.0)
        assert run_xyn(seq_zero_width(), ac, 0.0, OMEGA) == \
            pytest.approx(1.0, abs=1e-12)

    def test_matches_rectified_cosine(self):
        # cos(5.23115 rad) = 0.49580; agreement of full propagation with
        # the analytic rectified phase
        ac = ACFieldSpec(3.5e-6, F_AC, 0.0)
        s = run_xyn(seq_zero_width(), ac, 0.0, OMEGA)
        assert s == pytest.approx(0.49580, abs=1e-4)

    def test_analytic_agreement_up_to_3pi(self):
        seq = seq_zero_width()
        kappa = xyn_kappa(seq.n_pulses, seq.tau)
        for b in np.linspace(0.1e-6, 3 * np.pi / kappa, 9):
            for d in (0.0, 0.7, -1.2):
                s = run_xyn(seq, ACFieldSpec(b, F_AC, d), 0.0, OMEGA)
                phi = analytic_xyn_phase(b, d, seq.n_pulses, seq.tau)
                # |Phi recovered - Phi analytic| < 1e-3 rad
                assert abs(np.arccos(np.clip(s, -1, 1))
                           - abs((phi + np.pi) % (2 * np.pi) - np.pi)) < 1e-3

    def test_detuned_amplitude_reduced_and_symmetric(self):
        seq = seq_finite()
        ac = ACFieldSpec(3.5e-6, F_AC, 0.0)
        s0 = run_xyn(seq, ac, 0.0, OMEGA)
        sp = run_xyn(seq, ac, TWO_PI * 0.9e6, OMEGA)
        sm = run_xyn(seq, ac, -TWO_PI * 0.9e6, OMEGA)
        assert sp == pytest.approx(sm, abs=1e-9)
        # the rectified phase shrinks under detuning, moving S off the
        # ideal value (here Phi sits on the rising cosine flank)
        assert sp < s0

    def test_mismatched_tau_warns(self):
        seq = seq_zero_width()
        ac = ACFieldSpec(1e-6, 330e3, 0.0)
        with pytest.warns(UserWarning, match="not matched"):
            run_xyn(seq, ac, 0.0, OMEGA)

    def test_pulse_models_coincide_for_ideal_pulses(self):
        ac = ACFieldSpec(2e-6, F_AC, 0.3)
        vals = [run_xyn(seq_zero_width(), ac, 0.0, OMEGA, pulse_model=m)
                for m in ("rate", "tilted", "full")]
        assert vals[0] == pytest.approx(vals[1], abs=1e-12)
        assert vals[0] == pytest.approx(vals[2], abs=1e-12)


class TestPhaseSweep:
    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            phase_sweep(seq_zero_width(), 1e-6, [], 0.0, OMEGA)

    def test_even_in_delta(self):
        d = np.linspace(-np.pi / 2, np.pi / 2, 21)
        sw = phase_sweep(seq_zero_width(), 2.5e-6, d, 0.0, OMEGA)
        np.testing.assert_allclose(sw.signal, sw.signal[::-1], atol=1e-12)

    def test_pi_periodic(self):
        d = np.linspace(-np.pi / 2, np.pi / 2, 11)
        s1 = phase_sweep(seq_zero_width(), 2.5e-6, d, 0.0, OMEGA).signal
        s2 = phase_sweep(seq_zero_width(), 2.5e-6, d + np.pi, 0.0,
                         OMEGA).signal
        np.testing.assert_allclose(s1, s2, atol=1e-10)

    def test_matches_signal_model_shape(self):
        seq = seq_zero_width()
        d = np.linspace(-np.pi / 2, np.pi / 2, 25)
        sw = phase_sweep(seq, 1.2e-6, d, 0.0, OMEGA)
        kb = xyn_kappa(seq.n_pulses, seq.tau) * 1.2e-6
        want = xyn_signal_model({"C0": 0.0, "C": 1.0, "kappaB": kb}, d)
        np.testing.assert_allclose(sw.signal, want, atol=1e-9)


class TestSimulateRabi:
    def test_resonant_full_contrast(self):
        t = np.linspace(0, 2e-6, 400)
        tr = simulate_rabi(OMEGA, 0.0, t)
        assert tr.population.max() == pytest.approx(1.0, abs=1e-4)
        assert tr.population.min() == pytest.approx(0.0, abs=1e-4)
        assert np.all((tr.population >= 0) & (tr.population <= 1))

    def test_generalized_rabi_frequency(self):
        # fitted dominant frequency equals sqrt(omega^2 + det^2) to 0.5%
        # for det/omega up to 2
        from qdmsim.analysis import fit_rabi
        t = np.linspace(0, 2e-6, 600)
        for ratio in (0.0, 0.5, 1.0, 1.5, 2.0):
            det = ratio * OMEGA
            tr = simulate_rabi(OMEGA, det, t)
            fit = fit_rabi(tr)
            assert fit.omega2 == pytest.approx(np.hypot(OMEGA, det),
                                               rel=5e-3)

    def test_formula_is_consequence_of_propagation(self):
        t = np.linspace(0, 1e-6, 100)
        det = TWO_PI * 3e6
        tr = simulate_rabi(OMEGA, det, t)
        og = np.hypot(OMEGA, det)
        want = (OMEGA / og) ** 2 * np.sin(og * t / 2) ** 2
        np.testing.assert_allclose(tr.population, want, atol=1e-12)

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            simulate_rabi(OMEGA, 0.0, [])


class TestXYSequence:
    def test_pulse_count_multiple_of_order(self):
        with pytest.raises(ValueError):
            XYSequence(order=8, n_pulses=12, tau=1e-6)

    def test_batch_matches_scalar(self):
        seq = seq_finite()
        b = np.array([1e-6, 2e-6, 3e-6])
        d = np.array([0.1, -0.4, 1.0])
        det = np.array([0.0, 1e6, -2e6])
        pp, pm = xyn_readout_batch(seq, b, d, det, OMEGA)
        for i in range(3):
            s = run_xyn(seq, ACFieldSpec(b[i], F_AC, d[i]), det[i], OMEGA)
            assert pp[i] - pm[i] == pytest.approx(s, abs=1e-12)
