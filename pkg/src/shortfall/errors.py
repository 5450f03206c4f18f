"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class ShortfallError(Exception):
    """Base class for every error raised by the package."""


class DomainError(ShortfallError, ValueError):
    """An argument lies outside the domain of the operation."""


class DivergentIntegralError(DomainError):
    """The requested risk functional is infinite (e.g. Pareto index <= 1)."""


class UnsupportedDerivativeError(ShortfallError, NotImplementedError):
    """The law has no closed-form density derivative of the requested order."""


class NumericalError(ShortfallError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance.

    ``bracket`` holds the final root bracket for inversion failures and
    ``estimate``/``error`` the last quadrature estimate for integration
    failures; either may be ``None``.
    """

    def __init__(self, message, *, bracket=None, estimate=None, error=None):
        super().__init__(message)
        self.bracket = bracket
        self.estimate = estimate
        self.error = error


class InputError(DomainError):
    """Malformed user input (e.g. a CSV line that is not a number)."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
