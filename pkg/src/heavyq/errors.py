"""Exception and warning types shared across the package."""


class HeavyQError(Exception):
    """Base class for every error raised by heavyq."""


class NonIntegrableTail(HeavyQError):
    """The tail has no finite integral (infinite mean)."""


class NonConvergent(HeavyQError):
    """Adaptive quadrature exhausted its budget before meeting tolerance."""


QuadratureFailure = NonConvergent


class RegimeError(HeavyQError):
    """A formula was requested outside the load regime where it is valid."""


class UnstableError(RegimeError):
    """The queue is unstable: mean service time >= servers * mean interarrival."""


class ArgumentOrder(HeavyQError):
    """Joint-tail thresholds given in the wrong order (need x <= y)."""


class CouplingViolation(HeavyQError):
    """A pathwise comparison between coupled queues failed."""


class MajorantViolation(HeavyQError):
    """The two-server path exceeded its single-server majorants."""


class ConfigError(HeavyQError):
    """Scenario file could not be parsed or validated."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InsufficientSamples(UserWarning):
    """Fewer than ten exceedances behind a Monte Carlo estimate."""
