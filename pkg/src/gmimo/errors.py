"""Exception types shared across the package."""


class NumericalError(ArithmeticError):
    """Base class for numerical failures (CLI exit code 3)."""


class NotPositiveDefinite(NumericalError):
    """A matrix expected to be Hermitian positive definite failed Cholesky."""


class NoConvergence(NumericalError):
    """An iterative solver hit its iteration cap before meeting tolerance."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class NonPositiveVariance(NumericalError):
    """An asymptotic variance formula evaluated to a non-positive number."""

    def __init__(self, message, value=None):
        super().__init__(message)
        self.value = value


class DegenerateVariance(NonPositiveVariance):
    """The variance is zero to round-off, e.g. because every channel is zero."""


class ZeroInterference(ValueError):
    """SIR scaling was requested for an all-zero interference matrix."""
