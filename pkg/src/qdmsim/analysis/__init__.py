"""Inverse pipeline: fits, maps, moments, susceptibility, sensitivity."""
from .fitting import (FitFlags, OdmrFit, PhaseSweepFit, RabiFit,
                      damped_gauss_newton, fit_odmr, fit_phase_sweep,
                      fit_phase_sweep_batch, fit_rabi)
from .pipeline import (ACMaps, MomentSeries, SusceptibilityResult,
                       ac_maps, ac_moments, background_subtract,
                       moment_series, susceptibility)
from .sensitivity import (added_phase, added_phase_small_signal,
                          detuning_error_curve, min_detectable_field,
                          min_detectable_phase, off_axis_ac)

__all__ = [
    "FitFlags", "OdmrFit", "PhaseSweepFit", "RabiFit",
    "damped_gauss_newton", "fit_odmr", "fit_phase_sweep",
    "fit_phase_sweep_batch", "fit_rabi",
    "ACMaps", "MomentSeries", "SusceptibilityResult", "ac_maps", "ac_moments",
    "background_subtract", "moment_series", "susceptibility",
    "added_phase", "added_phase_small_signal", "detuning_error_curve",
    "min_detectable_field", "min_detectable_phase", "off_axis_ac",
]
