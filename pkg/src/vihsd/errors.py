"""Exception hierarchy shared across the package."""


class VihsdError(Exception):
    """Base class for all package errors."""


class DimensionError(VihsdError, ValueError):
    """Operand shapes are incompatible."""


class ContractError(VihsdError, RuntimeError):
    """An API precondition was violated by the caller."""


class DataError(VihsdError, ValueError):
    """Input data is malformed or out of range."""


class ConfigError(VihsdError, ValueError):
    """A configuration value is invalid."""


class FormatError(DataError):
    """A file does not follow its expected format."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CorruptionError(VihsdError, IOError):
    """A checkpoint on disk is incomplete or inconsistent."""


class OracleMisuseError(VihsdError, RuntimeError):
    """The gradient oracle was given a non-deterministic function."""


class NumericalError(VihsdError, ArithmeticError):
    """A NaN or infinite value appeared during computation."""
