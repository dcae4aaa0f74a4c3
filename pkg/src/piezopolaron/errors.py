"""Exception hierarchy shared by all modules."""


class PolaronError(Exception):
    """Base class for every error raised by :mod:`piezopolaron`."""


class DomainError(PolaronError, ValueError):
    """Input outside the mathematical domain of an operation."""


class RegimeError(PolaronError):
    """Momentum outside the subsonic regime (a denominator changes sign)."""


class ConvergenceError(PolaronError):
    """Iterative solver did not reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NumericError(PolaronError):
    """Numerical quadrature failed to converge."""


class ResourceError(PolaronError):
    """Combinatorial or memory budget exceeded."""

    def __init__(self, message, attempted=None):
        super().__init__(message)
        self.attempted = attempted


class DegenerateMomentsError(PolaronError):
    """Moment sequence is singular at the requested order.

    Raised when the trial state spans a Krylov space of dimension smaller
    than the requested bound order.
    """

    def __init__(self, message, max_order=None):
        super().__init__(message)
        self.max_order = max_order
