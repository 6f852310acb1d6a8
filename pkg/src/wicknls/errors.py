"""Exception hierarchy shared by every module."""

from __future__ import annotations


class WickNLSError(Exception):
    """Base class for all package errors."""


class ValidationError(WickNLSError, ValueError):
    """Malformed input or configuration (CLI exit code 1)."""


class BudgetError(WickNLSError, RuntimeError):
    """A computation would exceed its configured work budget (CLI exit code 2)."""


class CapacityError(BudgetError):
    """An enumeration would emit more diagrams than the configured limit."""


class SignError(ValidationError):
    """Sign rule of signed ternary trees violated."""


class NotALeafError(ValidationError):
    """Grafting target is not a leaf."""


class InvalidPairError(ValidationError):
    """The requested leaf pair does not belong to the couple."""


class NonRegularError(ValidationError):
    """Operation requires a regular couple."""


class DimensionError(ValidationError):
    """Vector dimensions do not agree."""


class ConvergenceError(BudgetError):
    """Fixed-point iteration failed to reach tolerance."""


class InstabilityError(BudgetError):
    """Time stepping blew up."""


class UnsupportedError(ValidationError):
    """Profile, order, or option outside the supported family."""
