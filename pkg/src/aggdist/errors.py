"""Exception types shared across the engines."""


class AggdistError(Exception):
    """Base class for all library-specific errors."""


class ParameterError(AggdistError, ValueError):
    """A distribution or engine parameter is outside its valid range."""


class UnderflowError(AggdistError):
    """A closed form evaluated to zero in double precision.

    Carries enough context for callers to switch to a scaled computation.
    """


class GridTooShortError(AggdistError):
    """A lattice grid does not extend far enough for the requested quantity."""


class TailMassError(AggdistError):
    """A grid is missing too much tail mass for a reliable tail statistic."""


class ConvergenceError(AggdistError):
    """An iterative computation failed to converge.

    Attributes
    ----------
    best : float or complex or None
        Best available estimate at the point of failure.
    error_bound : float or None
        Estimated error of ``best``.
    """

    def __init__(self, message, best=None, error_bound=None):
        super().__init__(message)
        self.best = best
        self.error_bound = error_bound


class EsUndefinedError(AggdistError):
    """Expected shortfall requested for a model with infinite mean."""


class InsufficientSamplesError(AggdistError):
    """A Monte Carlo run does not retain enough samples for the request."""
