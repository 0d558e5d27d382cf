"""
Error Types
===========

Every user-facing failure raised by the workbench derives from
``LabError``. The command line maps ``LabError`` to exit code 1 and
``InvariantViolation`` to exit code 2.
"""

from typing import Iterable, Optional, Sequence


class LabError(Exception):
    """Base class for errors caused by the input (programs, data, options)."""


class InvariantViolation(Exception):
    """An internal invariant does not hold; never the user's fault."""


class RecursiveProgram(LabError):
    def __init__(self, cycle: Sequence[str]):
        self.cycle = list(cycle)
        super().__init__(f"program is recursive: {' -> '.join(self.cycle)}")


class UnsafeRule(LabError):
    def __init__(self, rule: object, variables: Iterable[str]):
        self.rule = rule
        self.variables = list(variables)
        super().__init__(
            f"unsafe rule {rule}: variables {', '.join(self.variables)} do not occur positively"
        )


class UnboundBuiltin(LabError):
    def __init__(self, literal: object, variables: Iterable[str]):
        self.literal = literal
        self.variables = list(variables)
        super().__init__(
            f"built-in {literal} evaluated with unbound variables {', '.join(self.variables)}"
        )


class LetNotFound(LabError):
    pass


class NothingBelow(LabError):
    """The let variable touches only extensional predicates: the let is at a leaf."""


class VariableAbsent(LabError):
    pass


class ProgramTooLarge(LabError):
    pass


class InvalidPoint(LabError):
    pass


class UnknownRelation(LabError):
    pass


class SchemaMismatch(LabError):
    pass


class TooManyNulls(LabError):
    pass


class MixedModes(LabError):
    pass


class UnknownProfile(LabError):
    pass


class ParseError(LabError):
    """Syntax error in one of the text formats, with a 1-based position."""

    def __init__(
        self,
        message: str,
        line: int = 0,
        column: int = 0,
        expected: Optional[Iterable[str]] = None,
    ):
        self.line = line
        self.column = column
        self.expected = sorted(expected) if expected else []
        self.message = message
        text = f"{line}:{column}: {message}"
        if self.expected:
            text += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(text)
