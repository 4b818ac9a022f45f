"""Semantic exception hierarchy shared by all dispersionlab modules."""


class DispersionLabError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(DispersionLabError, ValueError):
    """Malformed or inconsistent input values (validation failures)."""


class ShapeError(InvalidInputError):
    """Mismatched alphabets, domains, or array shapes."""


class DomainError(InvalidInputError):
    """A numeric parameter lies outside its mathematically valid range."""


class UnsupportedOperationError(DispersionLabError, NotImplementedError):
    """The requested operation is outside the supported problem class."""


class ConvergenceError(DispersionLabError, RuntimeError):
    """An iterative solver failed to reach its certified tolerance."""

    def __init__(self, message, gap=None, iterations=None):
        super().__init__(message)
        self.gap = gap
        self.iterations = iterations


class EnumerationLimitError(InvalidInputError):
    """A simulation would require enumerating more than the allowed space."""


class InfeasibleTypeError(DispersionLabError, RuntimeError):
    """A perturbed conditional type has a negative entry at this blocklength."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class SelectionError(DispersionLabError, RuntimeError):
    """Codebook selection failed (e.g. all candidate weights are zero)."""


class NotFirstOrderOptimalWarning(UserWarning):
    """A solution fails a first-order optimality identity beyond tolerance."""
