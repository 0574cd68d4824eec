"""Exception hierarchy shared by every module of the package."""


class HamtestError(Exception):
    """Base class for all package errors."""


class DimensionError(HamtestError, ValueError):
    """Operands live on different numbers of qubits."""


class ResourceLimitError(HamtestError):
    """A dense computation would exceed the configured qubit cap."""


class InvalidGroupError(HamtestError, ValueError):
    """A Pauli set is not a maximal commuting subgroup."""


class ValidationError(HamtestError, ValueError):
    """An input violates a documented precondition (Hermiticity, ranges, ...)."""


class ConsistencyError(HamtestError, RuntimeError):
    """An internal cross-check failed; indicates a construction bug."""


class DomainError(HamtestError, ValueError):
    """A closed-form expression is evaluated where its denominator vanishes."""


class ReportError(HamtestError, OSError):
    """A report could not be written or read; the message names the path."""
