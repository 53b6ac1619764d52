"""Multi-cell Massive MIMO uplink simulator with double-scattering channels.

The package evaluates the ergodic uplink spectral-efficiency lower bound by
Monte-Carlo simulation for uncorrelated Rayleigh fading and for the double
scattering channel model, with LMMSE channel estimation under pilot
contamination and MR / ZF / MMSE linear detection.
"""

from .errors import ConfigError, DomainError, NumericalError, SingularityError

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DomainError",
    "NumericalError",
    "SingularityError",
    "__version__",
]
