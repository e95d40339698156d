"""Exception hierarchy shared by all modules."""


class SparseDemixError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(SparseDemixError, ValueError):
    """Non-finite data, out-of-range parameters or malformed containers."""


class ShapeMismatchError(InvalidInputError):
    """Operands whose block profiles or lengths do not agree."""


class ConvergenceError(SparseDemixError, RuntimeError):
    """An iterative routine failed to reach its tolerance."""


class BudgetExceededError(SparseDemixError, RuntimeError):
    """A dense materialization or enumeration would exceed its configured cap."""


class NoGuaranteeError(SparseDemixError):
    """An error bound was requested from a report whose guarantee does not hold."""
