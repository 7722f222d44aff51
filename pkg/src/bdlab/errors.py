"""Exception types shared across the package."""


class InputError(ValueError):
    """Malformed or inconsistent input (dimension mismatch, bad geometry, ...)."""


class ParseError(InputError):
    """Expression syntax error; carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class GrowthViolationError(ValueError):
    """An integrand evaluation escaped its declared linear-growth envelope."""


class RecessionError(ValueError):
    """A required recession limit did not converge."""


class ResolutionError(ValueError):
    """Requested feature size is below what the grid can resolve."""


class NotSolvableError(ValueError):
    """The elliptic inclusion has no solution for the supplied field.

    Carries the discrete PDE residual that triggered the verdict.
    """

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual
