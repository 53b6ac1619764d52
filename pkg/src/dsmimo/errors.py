"""Exception types shared by the simulator modules."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration (maps to CLI exit code 2)."""

    def __init__(self, message, key=None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class NumericalError(ArithmeticError):
    """Numerical failure: non-Hermitian / indefinite input, singular system."""


class SingularityError(NumericalError):
    """A Gram matrix is too ill-conditioned to invert."""
