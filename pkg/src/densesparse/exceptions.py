"""Exception types raised by the estimators."""


class DenseSparseError(ValueError):
    """Base class for all errors raised by this package."""


class InsufficientSupport(DenseSparseError):
    """Too few design points inside the smoothing window."""


class SingularDesign(DenseSparseError):
    """Local normal equations are numerically singular."""


class GridMismatch(DenseSparseError):
    """Two estimates live on different evaluation grids."""


class NegativeVariance(DenseSparseError):
    """An integrated variance surface came out clearly negative."""


class DegenerateVariance(DenseSparseError):
    """A variance curve is at or below the floor used for studentization."""


class LagTooLarge(DenseSparseError):
    """Not enough curves to estimate the requested lag."""


class DegenerateFold(DenseSparseError):
    """A cross-validation fold has an empty training set."""


class NonPositiveDefinite(DenseSparseError):
    """A simulated covariance matrix could not be factorized."""


class SchemaError(DenseSparseError):
    """Input table is missing required columns or has bad values."""


class RaggedGrid(DenseSparseError):
    """Curves within one sample do not share their observation times."""


class EmptyGroup(DenseSparseError):
    """A group has no curves for one of the two samples."""
