"""Exception hierarchy shared across the package."""


class QtrError(Exception):
    """Base class for all errors raised by qtrates."""


class DimensionError(QtrError, ValueError):
    """Operands have incompatible shapes."""


class NotHermitianError(QtrError, ValueError):
    """An operator expected to be Hermitian is not (within tolerance)."""


class ProjectorError(QtrError, ValueError):
    """A matrix violates the projector invariants."""


class DensityMatrixError(QtrError, ValueError):
    """A matrix violates the density-matrix invariants."""


class EmptyConditioningError(QtrError, ValueError):
    """The conditioning probability tr(rho0 Pi_A) is numerically zero."""


class PreconditionError(QtrError, ValueError):
    """A documented precondition of an operation is violated.

    Attributes:
        flag: short name of the failed precondition.
    """

    def __init__(self, message, flag=None):
        super().__init__(message)
        self.flag = flag


class BoundaryError(QtrError, ValueError):
    """A stencil or evaluation point falls outside the allowed time span."""


class ConvergenceError(QtrError, RuntimeError):
    """An iterative scheme failed to reach its tolerance."""


class BranchCutError(QtrError, ValueError):
    """A multivalued function was evaluated exactly on its branch cut."""


class DegeneracyError(QtrError, ValueError):
    """A spectrum is (near-)degenerate where a gap is required."""


class ConfigError(QtrError, ValueError):
    """A run configuration is malformed."""


class GateError(QtrError, RuntimeError):
    """An in-run consistency gate failed."""
