"""Exception types raised by the solvers and linear-algebra helpers."""


class EVQRError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(EVQRError, ValueError):
    pass


class NotPSD(EVQRError, ValueError):
    """A matrix expected to be positive semidefinite has a clearly negative eigenvalue."""


class SingularMatrix(EVQRError, ValueError):
    pass


class ConstraintInfeasible(EVQRError):
    """Zero is not in the interior of the convex hull of the covariate support.

    The mean-independence constraint then has no strictly positive solution
    and the dual potentials are not attained.
    """


class NoConvergence(EVQRError):
    """Iteration budget exhausted. ``report`` carries the last diagnostics, if any."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class Overflow(EVQRError, ArithmeticError):
    """A log-domain entry is too large to exponentiate safely."""


class DomainError(EVQRError, ValueError):
    pass


class SizeGuard(EVQRError, ValueError):
    pass
