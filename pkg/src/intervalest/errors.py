"""Exception and warning classes shared across the package."""


class IntervalEstError(Exception):
    """Base class for all errors raised by intervalest."""


class DimensionError(IntervalEstError, ValueError):
    """Operands have non-conformant shapes.

    The offending operand is stored in ``operand`` so callers (and the CLI)
    can point at it.
    """

    def __init__(self, operand, message):
        self.operand = operand
        super().__init__(f"{operand}: {message}")


class InvalidIntervalError(IntervalEstError, ValueError):
    """Raised when a lower bound exceeds the corresponding upper bound."""


class NonFiniteError(IntervalEstError, ValueError):
    """Raised when a matrix or vector has NaN or infinite entries."""


class HorizonError(IntervalEstError, ValueError):
    """Requested horizon is longer than the supplied signal."""


class QStarError(IntervalEstError):
    """No truncation order q with rho(|A^q|) < 1 could be found."""


class JsrBudgetError(IntervalEstError, ValueError):
    """Exhaustive product enumeration would exceed the product budget."""


class DominanceError(IntervalEstError, ValueError):
    """A member of a matrix set is not dominated by any member of the other."""

    def __init__(self, index, message):
        self.index = index
        super().__init__(message)


class RealizationError(IntervalEstError):
    """Numerical rank of a Hankel matrix is ambiguous or reconstruction failed.

    ``singular_values`` carries the spectrum that triggered the error.
    """

    def __init__(self, message, singular_values=None):
        self.singular_values = singular_values
        super().__init__(message)


class EmptyIntersectionError(IntervalEstError):
    """Intersection of estimator outputs produced an empty interval."""


class ScenarioError(IntervalEstError, ValueError):
    """Malformed scenario document."""


class StabilityWarning(UserWarning):
    """The configuration runs, but the BIBO condition is not guaranteed."""
