"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
2 for bad input, 3 for validation failures, 4 for numerical failures.
"""


class AffdiffError(Exception):
    exit_code = 1
    code = "error"


class InputError(AffdiffError):
    exit_code = 2
    code = "input_error"


class ParseError(InputError):
    code = "parse_error"


class ValidationError(AffdiffError):
    exit_code = 3
    code = "validation_error"


class NonManifoldError(ValidationError):
    code = "non_manifold"


class OrientationError(ValidationError):
    code = "inconsistent_orientation"


class DegenerateFaceError(ValidationError):
    code = "degenerate_face"


class SingularTransformError(ValidationError):
    code = "singular_transform"


class DegenerateTriangleError(ValidationError):
    code = "degenerate_triangle"


class InsufficientPointsError(ValidationError):
    code = "insufficient_points"


class DegeneratePreMetric(ValidationError):
    """Raised when |det g~| falls below the degeneracy threshold (flat or parabolic point)."""

    code = "degenerate_premetric"


class InsufficientDataError(ValidationError):
    code = "insufficient_data"


class DimensionMismatchError(ValidationError):
    code = "dimension_mismatch"


class NoRelevantError(ValidationError):
    code = "no_relevant"


class InvalidCorrespondenceError(ValidationError):
    code = "invalid_correspondence"


class SizeCapError(ValidationError):
    code = "size_cap"


class NumericalError(AffdiffError):
    exit_code = 4
    code = "numerical_error"


class SingularMetricError(NumericalError):
    code = "singular_metric"


class FactorizationError(NumericalError):
    code = "factorization_failed"


class ConvergenceError(NumericalError):
    code = "no_convergence"


class DisconnectedError(NumericalError):
    code = "disconnected"
