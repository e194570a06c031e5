"""Exception hierarchy shared by all laserlab modules."""


class LaserLabError(Exception):
    """Base class for every error raised by laserlab."""


class ValidationError(LaserLabError, ValueError):
    """An input parameter or configuration value is out of its domain.

    The offending field name is kept on ``field`` so callers (the CLI in
    particular) can report it without parsing the message.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class ConfigError(LaserLabError, ValueError):
    """A run configuration is malformed or inconsistent."""


class DivergenceError(LaserLabError, ArithmeticError):
    """A numerical state became non-finite."""

    def __init__(self, message, time=None):
        self.time = time
        if time is not None:
            message = f"{message} (t={time!r})"
        super().__init__(message)


class InvariantViolation(LaserLabError, AssertionError):
    """Two routes to the same quantity disagree beyond tolerance."""


class QuadratureError(LaserLabError, ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, error_estimate):
        self.error_estimate = error_estimate
        super().__init__(f"{message} (error estimate {error_estimate:.3e})")
