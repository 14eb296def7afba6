"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid user-supplied parameter or run configuration."""


class QuadratureError(ValueError):
    """A quadrature grid is not exact for the requested integrand degree."""


class FitError(ValueError):
    """A least-squares fit is under-determined or rank deficient."""


class LiftError(RuntimeError):
    """An approximate idempotent has no usable spectral gap at 1/2."""

    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


class SpanError(ValueError):
    """The characters of a set of idempotents do not span H^0 + H^2."""


class ConventionError(AssertionError):
    """A configured sign convention contradicts the measured asymptotics."""
