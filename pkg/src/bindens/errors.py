"""Exception hierarchy shared across the package.

The command line maps these onto process exit codes: configuration and
data problems exit 2, capacity refusals exit 3, numeric failures exit 4.
"""


class BindensError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(BindensError):
    """Invalid estimator, transform, or search configuration."""


class DataError(BindensError):
    """Malformed observation data."""


class InsufficientDataError(DataError):
    """Operation needs more observations than were provided."""


class CapacityError(BindensError):
    """Request would materialize a 2^n-sized object beyond the supported range."""


class NumericError(BindensError):
    """Numeric failure during evaluation."""


class TransformOverflowError(NumericError):
    """Transform argument lies outside the finite float64 range."""


class DegenerateNormalizerError(NumericError):
    """Normalization constant is zero, negative, or non-finite."""


class BudgetExceededError(BindensError):
    """Search budget ran out before the space was exhausted.

    Carries the best configuration and risk report found so far, so a
    caller can still act on the partial search.
    """

    def __init__(self, message, best_config=None, best_report=None):
        super().__init__(message)
        self.best_config = best_config
        self.best_report = best_report
