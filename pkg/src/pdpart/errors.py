"""Exception types shared across the package."""


class DomainError(ValueError):
    """Arguments fall outside the mathematical domain of an operation."""


class ResourceError(RuntimeError):
    """A size guard was exceeded (the computation would be too expensive)."""


class NumericGuardError(ArithmeticError):
    """A numerical safeguard tripped: non-convergence or catastrophic cancellation.

    ``partial`` and ``bound`` carry whatever diagnostic values the raising
    routine had at hand (partial sum, error bound, cancellation ratio).
    """

    def __init__(self, message, partial=None, bound=None):
        super().__init__(message)
        self.partial = partial
        self.bound = bound
