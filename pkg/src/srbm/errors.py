"""Exception hierarchy shared by all analysis modules."""


class SrbmError(Exception):
    """Base class for errors raised by this package."""


class StructuralError(SrbmError, ValueError):
    """Input has the wrong shape, type or schema; no analysis is possible."""


class SingularMatrixError(SrbmError, ArithmeticError):
    """A matrix that must be inverted is singular or too ill-conditioned."""

    def __init__(self, message, condition_number=float("inf")):
        super().__init__(message)
        self.condition_number = condition_number


class PreconditionError(SrbmError, ValueError):
    """Input is well-formed but violates the precondition of an operation."""


class LcpError(SrbmError, RuntimeError):
    """The one-step complementarity problem could not be solved."""

    def __init__(self, message, q=None, state=None, replication=None, step=None):
        super().__init__(message)
        self.q = q
        self.state = state
        self.replication = replication
        self.step = step
