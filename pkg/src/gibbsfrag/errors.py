"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the requested operation."""


class ResourceGuardError(DomainError):
    """A request would exceed a fixed resource cap (e.g. enumeration size)."""


class NumericError(ArithmeticError):
    """A numerical routine failed to reach its accuracy target.

    The best available value is kept in ``partial``.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class EfficiencyError(RuntimeError):
    """A rejection sampler's acceptance rate is too small to be practical."""


class DegenerateTestError(ValueError):
    """A statistical test has fewer than two usable cells."""
