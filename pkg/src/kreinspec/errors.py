"""Exception types shared across the package.

The CLI maps these onto exit codes, so every failure mode that a user can hit
from a config file has its own class here.
"""


class KreinSpecError(Exception):
    """Base class for all package errors."""


class InvalidInputError(KreinSpecError, ValueError):
    """Non-finite or malformed numerical input."""


class DomainError(KreinSpecError, ValueError):
    """Argument outside the domain where a model is defined."""


class SingularityError(DomainError):
    """Evaluation at a singular point of a potential or coefficient."""


class ConfigError(KreinSpecError, ValueError):
    """A run configuration failed validation."""


class SolverFailure(KreinSpecError, RuntimeError):
    """Dense eigensolver did not converge."""

    def __init__(self, dimension, message=None):
        self.dimension = dimension
        super().__init__(message or f"eigensolver failed to converge (dimension {dimension})")


class DegenerateThresholdError(KreinSpecError, ArithmeticError):
    """Rank filtration is inconsistent with any Jordan structure at the given threshold."""


class StepRefinementError(KreinSpecError, RuntimeError):
    """A continuation step moved eigenvalues further than the jump bound allows."""

    def __init__(self, lo, hi, jump, bound):
        self.lo, self.hi, self.jump, self.bound = float(lo), float(hi), float(jump), float(bound)
        super().__init__(
            f"eigenvalue jump {jump:.3e} exceeds bound {bound:.3e} on [{self.lo!r}, {self.hi!r}]; "
            "halve the step size"
        )


class AmbiguousBracketError(KreinSpecError, RuntimeError):
    """The reality predicate is not monotone inside an EP bracket."""

    def __init__(self, lo, hi, message=None):
        self.lo, self.hi = float(lo), float(hi)
        super().__init__(message or f"reality predicate changes more than once in [{self.lo!r}, {self.hi!r}]")


class AmbiguityError(KreinSpecError, RuntimeError):
    """Several candidate exceptional-point pairs could be the coalescing one."""

    def __init__(self, eps, message=None):
        self.eps = list(eps)
        listing = ", ".join(f"{ep.parameter:.9g}" for ep in self.eps)
        super().__init__(message or f"ambiguous exceptional-point configuration: {listing}")


class WindowError(KreinSpecError, ValueError):
    """Too few usable points in an exponent-fit window."""
