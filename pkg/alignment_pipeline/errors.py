"""Exception hierarchy shared by the library and the CLI.

Every error carries the process exit code the CLI should return for it.
"""

from __future__ import annotations

from typing import Optional


class AlignmentError(Exception):
    """Base class for all toolkit errors."""

    exit_code: int = 1


class UsageError(AlignmentError):
    exit_code = 1


class ParameterError(AlignmentError, ValueError):
    """A parameter is outside its allowed range."""

    exit_code = 1


class DataError(AlignmentError):
    """Input data is inconsistent (counts, ranges, empty corpora)."""

    exit_code = 2


class FormatError(DataError):
    """A file could not be parsed."""

    def __init__(self, message: str, line_number: Optional[int] = None, path: Optional[str] = None):
        self.line_number = line_number
        self.path = path
        location = ""
        if path:
            location += f"{path}:"
        if line_number is not None:
            location += f"{line_number}:"
        super().__init__(f"{location} {message}" if location else message)


class NumericalError(AlignmentError):
    exit_code = 3


class DimensionError(NumericalError, ValueError):
    """Tensor shapes do not agree."""


class DefinednessError(NumericalError):
    """A quantity has no valid support (all-masked softmax, empty loss)."""


class CapacityError(NumericalError):
    """A sequence exceeds a model capacity such as max positions."""


class ContractError(NumericalError):
    """A caller violated an API precondition."""


class TrainingError(NumericalError):
    """Training produced a non-finite value."""

    def __init__(self, message: str, parameter: Optional[str] = None):
        self.parameter = parameter
        super().__init__(message)
