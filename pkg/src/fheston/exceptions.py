"""Exception hierarchy shared across the package."""


class FHestonError(Exception):
    """Base class for all package errors."""


class DomainError(FHestonError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UsageError(FHestonError, ValueError):
    """Inconsistent or malformed request (empty batch, bad ladder, ...)."""


class InvalidSigmaError(FHestonError, ValueError):
    """The volatility function cannot be used for the requested quantity."""


class NumericalError(FHestonError, ArithmeticError):
    """A numerical routine failed (e.g. Cholesky on a non-PD matrix)."""


class ExploratoryRegimeWarning(UserWarning):
    """Emitted when H <= 1/2: the scheme runs but rate guarantees are off."""
