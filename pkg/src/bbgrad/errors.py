"""Exception hierarchy shared across the package."""


class BBGradError(Exception):
    """Base class for all package-specific failures."""


class DimensionMismatchError(BBGradError, ValueError):
    """Operands whose shapes are incompatible with the operation."""


class SolverFailureError(BBGradError):
    """A linear solve did not reach the requested residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class MatrixNotSpdError(BBGradError):
    """Detected indefiniteness (nonpositive diagonal or negative curvature)."""


class DegenerateStepError(BBGradError):
    """Zero displacement between iterates; no step size can be formed."""

    def __init__(self, message, k=None):
        super().__init__(message)
        self.k = k


class NonconvexStepError(BBGradError):
    """Nonpositive curvature (S, Y) <= 0 with no safeguard configured."""

    def __init__(self, message, k=None):
        super().__init__(message)
        self.k = k


class NewtonFailureError(BBGradError):
    """The per-step Newton iteration of a nonlinear solve did not converge."""

    def __init__(self, message, step=None, residual=None):
        super().__init__(message)
        self.step = step
        self.residual = residual


class InsufficientDataError(BBGradError):
    """A trace is too short for the requested diagnostic."""
