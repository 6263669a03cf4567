"""Exceptions raised by the tree-shift entropy toolkit.

Every exception carries ``message``, ``error_code`` and ``detail`` so callers can
log them uniformly, the same way API errors are logged elsewhere in the code.
"""

from typing import Any, Optional


class TreeShiftException(Exception):
    """Base class for all toolkit errors"""
    error_code = "TS000"

    def __init__(self, message: str, error_code: Optional[str] = None, detail: str = ""):
        super().__init__(message)
        self.message = message
        if error_code is not None:
            self.error_code = error_code
        self.detail = detail

    def __str__(self) -> str:
        if self.detail:
            return f"{self.message} ({self.detail})"
        return self.message


class ValidationError(TreeShiftException):
    """Input does not describe a valid relation matrix or Markov system"""
    error_code = "TS100"


class NonSquareError(ValidationError):
    error_code = "TS101"


class NonBinaryEntryError(ValidationError):
    error_code = "TS102"


class DeadRowError(ValidationError):
    """A generator has no successor, so its branch of the Cayley tree is finite"""
    error_code = "TS103"


class DimensionMismatchError(ValidationError):
    error_code = "TS104"


class EmptyAlphabetError(ValidationError):
    error_code = "TS105"


class IndexOutOfRangeError(ValidationError):
    error_code = "TS106"


class NotIrreducibleError(ValidationError):
    error_code = "TS107"


class EmptyShiftError(TreeShiftException):
    """Every pattern count of some generator reached zero"""
    error_code = "TS200"


class NoConvergenceError(TreeShiftException):
    """Iteration cap reached; ``estimate`` holds the partial run"""
    error_code = "TS201"

    def __init__(self, message: str, estimate: Any = None, detail: str = ""):
        super().__init__(message, detail=detail)
        self.estimate = estimate


class DepthCapExceededError(TreeShiftException):
    error_code = "TS202"


class OracleTooLargeError(TreeShiftException):
    error_code = "TS203"


class NotRecordedError(TreeShiftException):
    """A result was asked for a quantity it does not hold"""
    error_code = "TS204"


class ConfigError(TreeShiftException):
    """Config file could not be parsed or failed schema validation"""
    error_code = "TS300"

    def __init__(self, message: str, field: str = "", detail: str = ""):
        super().__init__(message, detail=detail)
        self.field = field

    def __str__(self) -> str:
        prefix = f"{self.field}: " if self.field else ""
        return prefix + super().__str__()


class UnknownCommandError(TreeShiftException):
    error_code = "TS301"
