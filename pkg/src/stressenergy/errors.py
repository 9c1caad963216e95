"""Exception hierarchy shared across the package."""


class StressEnergyError(Exception):
    """Base class for all package errors."""


class DomainError(StressEnergyError, ValueError):
    """Input outside the mathematical domain of an operation."""


class ShapeError(StressEnergyError, ValueError):
    """Array or grid shapes that do not fit together."""


class ConfigError(StressEnergyError, ValueError):
    """Invalid solver or run configuration."""


class UnsupportedError(StressEnergyError):
    """Operation not defined for the given potential or input."""


class ResolutionError(StressEnergyError, ValueError):
    """Grid too coarse for the requested length scale."""


class ConvergenceError(StressEnergyError):
    """Iteration failed to reach its tolerance.

    ``report`` carries whatever diagnostics were collected before giving up.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DivergenceError(StressEnergyError):
    """Iteration produced non-finite values.

    ``last_stable`` holds the last finite iterate.
    """

    def __init__(self, message, last_stable=None, iteration=None):
        super().__init__(message)
        self.last_stable = last_stable
        self.iteration = iteration
