"""Three-level cascade laser: photon statistics, squeezing and their
numerical cross-checks."""

from .model import LaserParams, Regime, classify_regime, derive_params

__version__ = "0.1.0"

__all__ = ["LaserParams", "Regime", "classify_regime", "derive_params", "__version__"]
