"""Exception types shared across the toolkit."""


class DialogActError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(DialogActError, ValueError):
    """Operand shapes are incompatible."""


class ParameterError(DialogActError, ValueError):
    """A numeric argument is outside its allowed range."""


class NumericError(DialogActError, ArithmeticError):
    """A computation produced a non-finite value."""


class ConfigError(DialogActError, ValueError):
    """Invalid or inconsistent configuration."""


class OrderingError(DialogActError, ValueError):
    """Operands were passed in the wrong order."""


class FormatError(DialogActError, ValueError):
    """A data file is malformed.

    ``path`` and ``line`` are attached when known so messages can point at
    the offending record.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None and line is not None:
            where = f"{path}:{line}: "
        elif path is not None:
            where = f"{path}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class MissingVectorsError(DialogActError, KeyError):
    """A precomputed vector store has no entry for a segment."""

    def __str__(self):
        return str(self.args[0]) if self.args else "missing vectors"
