"""Dialog act recognition with segment encoders and dialog-context features."""

from .diffcore import kernels
from .errors import (
    ConfigError,
    DialogActError,
    DimensionError,
    FormatError,
    MissingVectorsError,
    NumericError,
    OrderingError,
    ParameterError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DialogActError",
    "DimensionError",
    "FormatError",
    "MissingVectorsError",
    "NumericError",
    "OrderingError",
    "ParameterError",
    "__version__",
    "kernels",
]
