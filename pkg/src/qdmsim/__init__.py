"""qdmsim: widefield NV diamond microscope simulation and analysis."""
from .constants import CONST, D0, GAMMA_E, MU0, NV_AXIS

__version__ = "0.1.0"

__all__ = ["CONST", "GAMMA_E", "D0", "MU0", "NV_AXIS", "__version__"]
