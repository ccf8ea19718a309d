"""Exception classes shared across the package.

The CLI maps these onto exit codes: parse/format problems are distinct from
numerical failures, which are distinct from a planner that ran but found no
collision-free trajectory.
"""


class LieTrajError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(LieTrajError, ValueError):
    """An argument violates a documented precondition (shape, tag, range)."""


class BranchError(LieTrajError, ValueError):
    """Rotation angle at or near pi: the principal logarithm is ambiguous."""


class DegenerateTrajectoryError(LieTrajError, ValueError):
    """Trajectory has zero time steps or no motion to reparameterize."""


class ConvergenceError(LieTrajError, RuntimeError):
    """An iterative solver hit its iteration cap.

    Attributes:
        residual: final residual norm when the cap was reached.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NotPositiveDefiniteError(LieTrajError, ValueError):
    """A matrix required to be symmetric positive definite is not."""


class IKError(LieTrajError, RuntimeError):
    """Inverse kinematics did not reach the target tolerance.

    Attributes:
        residual: final pose-error norm.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class PlannerInitError(LieTrajError, RuntimeError):
    """Planner could not build its initial joint trajectory."""


class ParseError(LieTrajError, ValueError):
    """A file or payload does not conform to its documented schema.

    Attributes:
        line: 1-based line number when the source is a line-oriented file.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


# Numerical failures (exit code 3 in the CLI), as opposed to parse errors
# (exit code 2) and planner-no-solution (exit code 4).
MATH_ERRORS = (
    BranchError,
    DegenerateTrajectoryError,
    ConvergenceError,
    NotPositiveDefiniteError,
    IKError,
    PlannerInitError,
)
