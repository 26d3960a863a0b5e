"""Exception hierarchy shared by all solver modules."""


class StochNewtonError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(StochNewtonError, ValueError):
    """Bad arguments, shapes or configuration values."""


class ParseError(ValidationError):
    """Malformed LIBSVM input; carries the offending 1-based line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"{message} at line {line}"
        super().__init__(message)
        self.line = line


class SolverError(StochNewtonError, RuntimeError):
    """A numerical method could not produce an iterate."""


class SingularMatrixError(SolverError):
    """A system matrix failed its positive-definiteness test."""


class NonConvergenceError(SolverError):
    """An iterative method ran out of iterations.

    ``residual`` and ``best`` hold the last residual and the best iterate seen,
    so callers can inspect how far off the method was.
    """

    def __init__(self, message, residual=None, best=None):
        super().__init__(message)
        self.residual = residual
        self.best = best
