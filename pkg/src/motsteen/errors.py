"""Shared exception types.

The CLI maps these onto exit codes: input/parse problems exit 2,
mathematical verdicts (a failed check is still a successful run) exit 1,
internal invariant breaches exit 3.
"""


class MotsteenError(Exception):
    """Base class for all package errors."""


class DegreeError(MotsteenError):
    """Operands are not bihomogeneous of compatible bidegree."""


class DegreeCapError(MotsteenError):
    """A computation exceeded the configured topological degree cap."""


class MatrixCapError(MotsteenError):
    """A matrix exceeded the configured bit budget."""


class StructureError(MotsteenError):
    """Malformed weight data, dimensions, or module presentation."""


class DomainError(MotsteenError):
    """Operation applied outside its stated precondition."""


class ParseError(MotsteenError):
    """Unreadable input text; carries a line number when available."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InternalError(MotsteenError):
    """An invariant the theory guarantees was violated; always a bug."""
