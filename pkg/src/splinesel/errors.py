"""Exception and warning types shared across the package."""


class SplineselError(Exception):
    """Base class for all errors raised by splinesel."""


class FormatError(SplineselError, ValueError):
    """Input file does not follow the expected layout."""


class ValidationError(SplineselError, ValueError):
    """Data violates a structural invariant (ordering, finiteness, shapes)."""


class PreconditionError(SplineselError, ValueError):
    """Arguments do not satisfy the documented preconditions."""


class DomainError(SplineselError, ValueError):
    """A value lies outside the domain of a function."""


class SingularDesignError(SplineselError, ValueError):
    """The B-spline design matrix is rank deficient."""


class IllPosedLooError(SplineselError, ValueError):
    """Removing a single sample leaves the least-squares fit underdetermined."""


class ConfigError(SplineselError, ValueError):
    """Pipeline configuration is invalid."""


class StageError(SplineselError):
    """Error raised inside a pipeline stage; ``stage`` names where it happened."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")


class DegenerateSampleWarning(UserWarning):
    """Issued when an estimate is computed on a degenerate sample."""


class ConditioningWarning(UserWarning):
    """Issued when a model fit is numerically poorly conditioned."""
