"""Detection limits, phase-propagation algebra, off-axis artifact and the
detuning error curve."""
import numpy as np

from ..constants import D0, GAMMA_E
from ..spin import PhaseSweep, phase_sweep, xyn_kappa
from .fitting import fit_phase_sweep


def min_detectable_field(sigma_s, c, kappa):
    """Smallest resolvable AC amplitude sigma_S / (C kappa), tesla."""
    if c <= 0:
        raise ValueError("contrast C must be > 0")
    return sigma_s / (c * kappa)


def min_detectable_phase(sigma_s, c, kappa, b_ac):
    """Smallest resolvable AC phase sigma_S / (C B kappa), radians."""
    if b_ac <= 0:
        raise ValueError("b_ac must be > 0")
    return min_detectable_field(sigma_s, c, kappa) / b_ac


def added_phase(b_s, b_a, delta_s):
    """Phase shift of the total AC signal when a sample field of signed
    amplitude b_s and phase delta_s adds to the applied field b_a."""
    if b_s == 0 and b_a == 0:
        raise ValueError("at least one field must be nonzero")
    return np.arctan2(b_s * np.sin(delta_s), b_a + b_s * np.cos(delta_s))


def added_phase_small_signal(b_s, b_a, delta_s):
    """First-order form (b_s/b_a) * delta_s, valid for b_s << b_a and
    small sample phase."""
    return b_s / b_a * delta_s


def off_axis_ac(b_perp_dc, b_perp_ac):
    """Spurious AC field magnitude 3 gamma_e / D0 * B_perp_dc * B_perp_ac."""
    return 3.0 * GAMMA_E / D0 * b_perp_dc * b_perp_ac


def detuning_error_curve(detunings, rabi_omega, seq, b_ac, delta_grid=None,
                         pulse_model="rate", ac_during_pulses=True):
    """Fractional amplitude error (B_fit - B_true)/B_true per detuning.

    Each point simulates a full phase sweep with finite pulses and fits it
    with the readout model."""
    detunings = np.atleast_1d(np.asarray(detunings, dtype=float))
    if delta_grid is None:
        delta_grid = np.linspace(-0.5 * np.pi, 0.5 * np.pi, 25)
    kappa = xyn_kappa(seq.n_pulses, seq.tau)
    errors = np.empty_like(detunings)
    for i, det in enumerate(detunings):
        sweep = phase_sweep(seq, b_ac, delta_grid, det, rabi_omega,
                            pulse_model=pulse_model,
                            ac_during_pulses=ac_during_pulses)
        fit = fit_phase_sweep(sweep, kappa=kappa)
        errors[i] = (fit.b_ac - b_ac) / b_ac
    return errors
