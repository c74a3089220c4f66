"""Two-level NV spin dynamics in the rotating frame.

Propagates a spin through XY-N dynamical-decoupling sequences with a
synchronized AC target field and a static detuning, and provides the
closed-form reference models (rectified phase, readout signal, Rabi).

Pulse imperfection models for the sequence-level simulation:

``rate`` (default)
    Pulses rotate about their nominal equatorial axes but at the
    generalized Rabi rate sqrt(omega^2 + detuning^2), so a detuned pulse
    over- rotates; pi/2 pulses are ideal and the static detuning phase is
    taken as refocused by the decoupling train.  This reproduces the
    smooth, sign-definite, symmetric-in-detuning amplitude bias of the
    readout chain.
``tilted``
    Pulses apply the exact unitary of the detuned Hamiltonian
    (tilted axis and generalized rate), placed instantaneously on the
    rectification grid.
``full``
    Pulses occupy real time, the static detuning phase accumulates during
    free evolution, and the AC field is tracked inside pulses by slicing.
    Exposes the coherent pulse-timing interference of a single ideal spin.

In every model a zero pulse width means an ideal rotation.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .constants import GAMMA_E, TWO_PI

PULSE_MODELS = ("rate", "tilted", "full")

# Equatorial-axis azimuths of the decoupling pi pulses.
XY_PHASE_TABLE = {
    4: (0.0, 0.5 * np.pi, 0.0, 0.5 * np.pi),
    8: (0.0, 0.5 * np.pi, 0.0, 0.5 * np.pi,
        0.5 * np.pi, 0.0, 0.5 * np.pi, 0.0),
}

# Final pi/2 azimuths for the two readout frames.  The sign convention is
# fixed so that the "+x" readout difference returns +cos(Phi): at zero AC
# field the normalized contrast is +1.
_READOUT_PLUS = np.pi
_READOUT_MINUS = 0.0


@dataclass
class SpinState:
    """Normalized two-level amplitude pair (|0>, |1>)."""

    amp0: complex
    amp1: complex

    def __post_init__(self):
        norm = abs(self.amp0) ** 2 + abs(self.amp1) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"spin state not normalized: |amp|^2 = {norm!r}")

    @classmethod
    def ground(cls):
        return cls(1.0 + 0.0j, 0.0j)

    @property
    def p0(self):
        return abs(self.amp0) ** 2

    @property
    def p1(self):
        return abs(self.amp1) ** 2


@dataclass(frozen=True)
class ControlPulse:
    """A resonant-frame microwave pulse."""

    rabi_omega: float          # angular Rabi rate, rad/s
    phase: float               # azimuth of the rotation axis, rad
    detuning: float = 0.0      # rad/s
    duration: float = 0.0      # s

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("pulse duration must be >= 0")
        if self.rabi_omega < 0:
            raise ValueError("rabi_omega must be >= 0")


@dataclass(frozen=True)
class ACFieldSpec:
    """Target AC field along the NV axis: amplitude*cos(2 pi f t + phase)."""

    amplitude: float           # T
    frequency: float           # Hz
    initial_phase: float = 0.0 # rad

    def __post_init__(self):
        if self.frequency <= 0:
            raise ValueError("AC frequency must be > 0")


@dataclass(frozen=True)
class XYSequence:
    """XY-N decoupling schedule.

    tau is the center-to-center pi-pulse spacing; the pulse centers define
    the rectification grid (tau/2, 3 tau/2, ...) with the time origin at
    the end of the initial pi/2 pulse.
    """

    order: int = 8
    n_pulses: int = 8
    tau: float = 1.0 / (2 * 300e3)
    pi_duration: float = 0.0
    pi2_duration: float = 0.0
    final_phase_sign: str = "+x"

    def __post_init__(self):
        if self.order not in XY_PHASE_TABLE:
            raise ValueError(f"unsupported XY order {self.order}")
        if self.n_pulses <= 0 or self.n_pulses % self.order:
            raise ValueError("n_pulses must be a positive multiple of the order")
        if self.tau <= 0:
            raise ValueError("tau must be > 0")
        if self.pi_duration < 0 or self.pi2_duration < 0:
            raise ValueError("pulse durations must be >= 0")
        if self.final_phase_sign not in ("+x", "-x"):
            raise ValueError("final_phase_sign must be '+x' or '-x'")

    @classmethod
    def matched(cls, f_ac, n_pulses=8, order=8, rabi_omega=None, **kw):
        """Sequence with tau = 1/(2 f_ac) and widths set by the Rabi rate."""
        tau = 1.0 / (2.0 * f_ac)
        if rabi_omega:
            kw.setdefault("pi_duration", np.pi / rabi_omega)
            kw.setdefault("pi2_duration", 0.5 * np.pi / rabi_omega)
        return cls(order=order, n_pulses=n_pulses, tau=tau, **kw)

    def pulse_phases(self):
        base = XY_PHASE_TABLE[self.order]
        return np.array([base[k % self.order] for k in range(self.n_pulses)])

    def duration(self):
        """Physical span from the start of the initial pi/2 to the end of
        the final pi/2 (pulses sit symmetrically on the grid)."""
        return self.n_pulses * self.tau + 2 * self.pi2_duration

    def mw_window(self):
        """Total time the spin is driven or precessing, counting pi pulses
        on top of the free-evolution grid (the accounting that puts an
        XY-8 block at 300 kHz near 14.8 us)."""
        return self.n_pulses * (self.tau + self.pi_duration)


@dataclass
class RabiTrace:
    """Driven-population record P(|1>) over time."""

    times: np.ndarray
    population: np.ndarray


@dataclass
class PhaseSweep:
    """Readout signal versus AC initial phase."""

    delta: np.ndarray
    signal: np.ndarray

    def __post_init__(self):
        self.delta = np.asarray(self.delta, dtype=float)
        self.signal = np.asarray(self.signal, dtype=float)
        if self.delta.shape != self.signal.shape:
            raise ValueError("delta and signal must have equal shapes")


def propagate_pulse(state, pulse):
    """Advance a spin state by the exact pulse unitary
    U = exp(-i (det/2 sz + omega/2 (cos sx + sin sy)) t)."""
    og = np.hypot(pulse.detuning, pulse.rabi_omega)
    half = 0.5 * og * pulse.duration
    c = np.cos(half)
    s = 0.5 * pulse.duration * np.sinc(half / np.pi)
    e = np.exp(-1j * pulse.phase)
    u00 = c - 1j * s * pulse.detuning
    u01 = -1j * s * pulse.rabi_omega * e
    a0 = u00 * state.amp0 + u01 * state.amp1
    a1 = (-1j * s * pulse.rabi_omega * np.conj(e)) * state.amp0 \
        + (c + 1j * s * pulse.detuning) * state.amp1
    return SpinState(a0, a1)


def free_evolution_phase(ac, dc_detuning, t0, t1):
    """Relative phase accumulated between |0> and |1> over [t0, t1]:
    2 pi gamma_e * integral of the AC field plus dc_detuning * (t1 - t0)."""
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    w = TWO_PI * ac.frequency
    acc = TWO_PI * GAMMA_E * ac.amplitude / w * (
        np.sin(w * t1 + ac.initial_phase) - np.sin(w * t0 + ac.initial_phase))
    return acc + dc_detuning * (t1 - t0)


def xyn_kappa(n_pulses, tau):
    """Phase-per-field gain kappa = 4 gamma_e N tau (rad/T)."""
    return 4.0 * GAMMA_E * n_pulses * tau


def analytic_xyn_phase(b_ac, delta, n_pulses, tau):
    """Ideal rectified phase kappa * B * cos(delta) (rad)."""
    return xyn_kappa(n_pulses, tau) * b_ac * np.cos(delta)


def xyn_signal_model(params, delta):
    """Readout model C0 + C cos(kappaB cos delta).

    params maps {"C0", "C", "kappaB"}; used for both synthesis and fitting.
    """
    return params["C0"] + params["C"] * np.cos(
        params["kappaB"] * np.cos(np.asarray(delta, dtype=float)))


def _compile_sequence(seq, pulse_model):
    """Build the segment program executed by the kernels.

    Returns (kind, f0, f1, phase) arrays covering everything up to but not
    including the final pi/2 pulse, plus the op describing a final pi/2 of
    azimuth `ph` via `final_op(ph)`.
    """
    if pulse_model not in PULSE_MODELS:
        raise ValueError(f"unknown pulse model {pulse_model!r}")
    phases = seq.pulse_phases()
    n = seq.n_pulses
    tau = seq.tau
    w = seq.pi_duration
    w2 = seq.pi2_duration

    kind, f0, f1, phs = [], [], [], []

    def add(k, a, b, p):
        kind.append(k)
        f0.append(a)
        f1.append(b)
        phs.append(p)

    def add_pulse(center, width, azimuth, nominal_angle):
        if width == 0.0:
            add(kernels.OP_ROT, nominal_angle, 0.0, azimuth)
        elif pulse_model == "rate":
            add(kernels.OP_RATE_PULSE, width, center, azimuth)
        elif pulse_model == "tilted":
            add(kernels.OP_TILT_PULSE, width, center, azimuth)
        else:
            add(kernels.OP_SLICE_PULSE, width, center - 0.5 * width, azimuth)

    # initial pi/2 about +x; in the rate model pi/2 pulses are kept ideal
    if pulse_model == "rate" or w2 == 0.0:
        add(kernels.OP_ROT, 0.5 * np.pi, 0.0, 0.0)
    elif pulse_model == "tilted":
        add_pulse(0.0, w2, 0.0, 0.5 * np.pi)
    else:
        add(kernels.OP_SLICE_PULSE, w2, -w2, 0.0)

    t = 0.0
    occupy = pulse_model == "full" and w > 0.0
    for k in range(n):
        tc = (k + 0.5) * tau
        gap_end = tc - 0.5 * w if occupy else tc
        add(kernels.OP_FREE, t, gap_end, 0.0)
        add_pulse(tc, w, phases[k], np.pi)
        t = tc + 0.5 * w if occupy else tc
    add(kernels.OP_FREE, t, n * tau, 0.0)

    def final_op(azimuth):
        if pulse_model == "rate" or w2 == 0.0:
            return (kernels.OP_ROT, 0.5 * np.pi, 0.0, azimuth)
        if pulse_model == "tilted":
            return (kernels.OP_TILT_PULSE, w2, n * tau, azimuth)
        return (kernels.OP_SLICE_PULSE, w2, n * tau, azimuth)

    ops = (np.array(kind, dtype=np.int8), np.array(f0), np.array(f1),
           np.array(phs))
    return ops, final_op


def _check_tau_match(seq, frequency):
    matched = 1.0 / (2.0 * frequency)
    if abs(seq.tau - matched) > 1e-9 * matched:
        warnings.warn(
            f"sequence tau {seq.tau:.6g} s is not matched to the AC half "
            f"period {matched:.6g} s; simulating the mismatch as given",
            stacklevel=3)


def xyn_readout_batch(seq, b_ac, delta, dc_detuning, rabi_omega,
                      pulse_model="rate", ac_during_pulses=True,
                      ac_frequency=None, n_slices=8):
    """Both-readout populations for element arrays of operating points.

    b_ac, delta, dc_detuning, rabi_omega broadcast to a common 1-D shape;
    returns (p_plus, p_minus): P(|0>) after the final pi/2 of each readout
    frame.  The normalized contrast is p_plus - p_minus.
    """
    if ac_frequency is None:
        ac_frequency = 1.0 / (2.0 * seq.tau)
    b_ac, delta, det, omega = np.broadcast_arrays(
        *(np.atleast_1d(np.asarray(x, dtype=float))
          for x in (b_ac, delta, dc_detuning, rabi_omega)))
    shape = b_ac.shape
    b_ac, delta, det, omega = (x.reshape(-1) for x in (b_ac, delta, det, omega))

    (kind, f0, f1, phs), final_op = _compile_sequence(seq, pulse_model)
    w_ac = TWO_PI * ac_frequency
    include_static = pulse_model == "full"
    args = dict(w_ac=w_ac, gamma_pref=TWO_PI * GAMMA_E,
                include_static=include_static,
                ac_in_pulse=ac_during_pulses, n_slices=n_slices)

    amp0, amp1 = kernels.xyn_propagate(kind, f0, f1, phs,
                                       b_ac, delta, det, omega, **args)
    out = []
    for azimuth in (_READOUT_PLUS, _READOUT_MINUS):
        fk, ff0, ff1, fph = final_op(azimuth)
        a0, _ = kernels.xyn_propagate(
            np.array([fk], dtype=np.int8), np.array([ff0]), np.array([ff1]),
            np.array([fph]), b_ac, delta, det, omega,
            amp0=amp0.copy(), amp1=amp1.copy(), **args)
        out.append(np.abs(a0) ** 2)
    return out[0].reshape(shape), out[1].reshape(shape)


def run_xyn(seq, ac, dc_detuning, rabi_omega, pulse_model="rate",
            ac_during_pulses=True, n_slices=8):
    """Normalized readout contrast S = P+x(|0>) - P-x(|0>) for one
    operating point; equals cos(Phi_NV) for ideal pulses at zero detuning."""
    _check_tau_match(seq, ac.frequency)
    p_plus, p_minus = xyn_readout_batch(
        seq, ac.amplitude, ac.initial_phase, dc_detuning, rabi_omega,
        pulse_model=pulse_model, ac_during_pulses=ac_during_pulses,
        ac_frequency=ac.frequency, n_slices=n_slices)
    return float(p_plus.reshape(-1)[0] - p_minus.reshape(-1)[0])


def phase_sweep(seq, ac_amplitude, delta_grid, dc_detuning, rabi_omega,
                ac_frequency=None, pulse_model="rate",
                ac_during_pulses=True, n_slices=8):
    """Evaluate the readout contrast over a grid of AC initial phases."""
    delta_grid = np.asarray(delta_grid, dtype=float)
    if delta_grid.size == 0:
        raise ValueError("empty delta grid")
    if ac_frequency is None:
        ac_frequency = 1.0 / (2.0 * seq.tau)
    else:
        _check_tau_match(seq, ac_frequency)
    p_plus, p_minus = xyn_readout_batch(
        seq, ac_amplitude, delta_grid, dc_detuning, rabi_omega,
        pulse_model=pulse_model, ac_during_pulses=ac_during_pulses,
        ac_frequency=ac_frequency, n_slices=n_slices)
    return PhaseSweep(delta_grid, p_plus - p_minus)


def simulate_rabi(rabi_omega, dc_detuning, time_grid):
    """Drive |0> with a constant detuned pulse and record P(|1>)(t).

    The trace comes from actual propagation; the generalized-Rabi formula
    P = (omega/omega2)^2 sin^2(omega2 t / 2) is a testable consequence.
    """
    t = np.asarray(time_grid, dtype=float)
    if t.size == 0:
        raise ValueError("empty time grid")
    og = np.hypot(dc_detuning, rabi_omega)
    half = 0.5 * og * t
    c = np.cos(half)
    s = 0.5 * t * np.sinc(half / np.pi)
    # U applied to (1, 0): amp1 = -i s omega e^{i phase}, phase = 0
    amp1 = -1j * s * rabi_omega
    amp0 = c - 1j * s * dc_detuning
    pop = np.abs(amp1) ** 2
    norm = pop + np.abs(amp0) ** 2
    return RabiTrace(t, pop / norm)
