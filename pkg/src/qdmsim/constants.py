"""Physical constants and the NV sensing geometry."""
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class PhysicalConstants:
    """Constants used throughout the simulator (SI units)."""

    gamma_e: float = 2.8024e10      # electron gyromagnetic ratio, Hz/T (28.024 kHz/uT)
    d0: float = 2.87e9              # NV zero-field splitting, Hz
    mu0: float = 4.0e-7 * np.pi     # vacuum permeability, T*m/A


CONST = PhysicalConstants()

GAMMA_E = CONST.gamma_e
D0 = CONST.d0
MU0 = CONST.mu0

# NV axis tilt from the surface normal, in the y-z plane.
NV_THETA_DEG = 54.6

# Unit vector of the NV axis in sample coordinates: B_NV = sqrt(2/3) By + sqrt(1/3) Bz.
NV_AXIS = np.array([0.0, np.sqrt(2.0 / 3.0), np.sqrt(1.0 / 3.0)])
