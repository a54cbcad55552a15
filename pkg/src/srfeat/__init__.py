"""4x single-image super-resolution with discriminator feature-matching
content losses, full-reference quality metrics, and a MOS study service."""

__version__ = "0.1.0"

from .errors import (ConfigurationError, ConflictError, InputError,
                     NoCapacityError, NumericError, SrfeatError)

__all__ = [
    "ConfigurationError",
    "ConflictError",
    "InputError",
    "NoCapacityError",
    "NumericError",
    "SrfeatError",
    "__version__",
]
