"""Exception types shared across the package.

Validation errors (bad inputs, bad configuration) and numeric failures
(solver breakdowns, non-finite values) are kept in separate branches so the
CLI can map them to distinct exit codes.
"""


class DiffcurvError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(DiffcurvError):
    """Invalid input data or configuration."""


class NumericError(DiffcurvError):
    """A numerical procedure failed at runtime."""


class InvalidConfig(ValidationError):
    pass


class DegenerateCloud(ValidationError):
    pass


class InvalidSurfaceParams(ValidationError):
    pass


class ZeroRow(ValidationError):
    pass


class EmptyRegion(ValidationError):
    pass


class DegenerateVariance(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class ConvergenceFailure(NumericError):
    pass


class RankDeficient(NumericError):
    pass


class NonFiniteLoss(NumericError):
    pass


class NonFiniteValue(NumericError):
    pass


class LocalityFailure(NumericError):
    pass
