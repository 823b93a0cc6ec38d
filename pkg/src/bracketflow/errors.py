"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`BracketflowError`, so callers (and the CLI) can catch one type.
"""

from __future__ import annotations


class BracketflowError(Exception):
    """Base class for all package errors."""


class IndexOutOfRange(BracketflowError, IndexError):
    pass


class ConflictingEntry(BracketflowError, ValueError):
    pass


class SplittingViolation(BracketflowError, ValueError):
    pass


class SingularMatrix(BracketflowError, ValueError):
    pass


class NonpositiveScale(BracketflowError, ValueError):
    pass


class DimensionMismatch(BracketflowError, ValueError):
    pass


class NotALieBracket(BracketflowError, ValueError):
    pass


class ZeroBracket(BracketflowError, ValueError):
    pass


class ScalModNonnegative(BracketflowError, ValueError):
    pass


class NoConvergence(BracketflowError, RuntimeError):
    pass


class FlatBracket(BracketflowError, ValueError):
    pass


class DecompositionSingular(BracketflowError, ValueError):
    pass


class NegativeComponent(BracketflowError, ValueError):
    pass


class GaugeFailed(BracketflowError, RuntimeError):
    pass


class NonTriangularGauge(BracketflowError, ValueError):
    pass


class JacobiDrift(BracketflowError, RuntimeError):
    pass


class OutOfRange(BracketflowError, ValueError):
    pass


class UnknownEntry(BracketflowError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class BadConfig(BracketflowError, ValueError):
    pass


class BlowUp(BracketflowError, RuntimeError):
    """Curvature or step-size ceiling reached: finite-time extinction.

    ``time`` is the last accepted time and ``trajectory`` (if attached by
    the caller) holds the samples recorded before termination.
    """

    def __init__(self, message: str, time: float | None = None, state=None, trajectory=None):
        super().__init__(message)
        self.time = time
        self.state = state
        self.trajectory = trajectory
