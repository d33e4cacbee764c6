"""Exception hierarchy shared by all modules."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class FactorizationError(DomainError):
    """Cholesky factorization failed.

    Attributes
    ----------
    pivot : int
        Zero-based index of the first pivot that was not strictly positive.
    """

    def __init__(self, message, pivot):
        super().__init__(message)
        self.pivot = pivot


class NotInDomainError(DomainError):
    """A dependence matrix is not in the strictly conditionally negative
    definite class; ``subset`` names the offending index tuple."""

    def __init__(self, message, subset=None):
        super().__init__(message)
        self.subset = subset


class CapacityError(DomainError):
    """Problem size exceeds a documented ceiling."""


class IntegrationError(ArithmeticError):
    """An integrand produced NaN or a quadrature failed to converge."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class SimulationError(RuntimeError):
    """A sampler could not meet its truncation target."""
