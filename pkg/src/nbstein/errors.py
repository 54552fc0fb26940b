"""Exception hierarchy for nbstein."""

from __future__ import annotations


class NBSteinError(Exception):
    """Base class for all library errors."""


class ParameterDomainError(NBSteinError, ValueError):
    """A parameter lies outside the domain where the quantity is defined."""


class PreconditionError(NBSteinError, ValueError):
    """An operation was called outside its stated range (e.g. z <= 1)."""


class InfeasibleMatchingError(NBSteinError, ValueError):
    """Moment matching is impossible, e.g. Var(V) <= E(V)."""


class SeriesConvergenceError(NBSteinError, ArithmeticError):
    """A truncated series hit its term cap before the tail was certified."""

    def __init__(self, message: str, partial: float, n_terms: int):
        super().__init__(message)
        self.partial = partial
        self.n_terms = n_terms


class StateSpaceError(NBSteinError, MemoryError):
    """Exact enumeration would exceed the state-space limit."""


class UnsupportedLawError(NBSteinError, TypeError):
    """The requested quantity is not available for this joint law."""


class ConstructionError(NBSteinError, ValueError):
    """A joint law cannot be built from the given marginals/pairs."""


class ConfigError(NBSteinError, ValueError):
    """Invalid configuration file or flag; ``path`` names the offending field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
