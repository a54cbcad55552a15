"""Exception taxonomy shared across the package."""


class SrfeatError(Exception):
    """Base class for all package errors."""


class InputError(SrfeatError, ValueError):
    """Malformed runtime input: shape mismatch, bad index, unreadable data."""


class ConfigurationError(SrfeatError, ValueError):
    """Invalid or inconsistent configuration, including missing weights."""


class NumericError(SrfeatError, ArithmeticError):
    """Non-finite value where a finite one is required."""


class NoCapacityError(SrfeatError, RuntimeError):
    """Study has no unexhausted image assignments left for a new session."""


class ConflictError(SrfeatError, RuntimeError):
    """Submission conflicts with an already-persisted record."""
