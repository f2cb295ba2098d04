"""Exception hierarchy shared by all ecmargin modules."""

from __future__ import annotations


class EcmError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(EcmError, ValueError):
    """An argument or data structure violates a documented precondition."""


class InputFormatError(EcmError, ValueError):
    """A file could not be parsed under its declared schema.

    The message carries line/field diagnostics where available.
    """


class UnknownClassError(EcmError, KeyError):
    """A class_id was requested that is not present in the counts."""


class UndefinedPrecisionError(EcmError, ArithmeticError):
    """Precision is 0/0 at the requested threshold; the caller must pick a convention."""


class ResourceLimitError(EcmError, RuntimeError):
    """A guard on problem size was exceeded (e.g. the O(n^2) oracle)."""


class NumericalError(EcmError, RuntimeError):
    """A numerical procedure failed to converge or detected an inconsistency.

    Attributes carry the last iterate so callers can diagnose:
        last_iterate: the final decision variable (numpy array or scalar), if any
        grad_norm: norm of the projected gradient at the last iterate, if known
    """

    def __init__(self, message: str, last_iterate=None, grad_norm: float | None = None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.grad_norm = grad_norm
