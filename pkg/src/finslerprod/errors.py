"""Exception types shared across the package."""

from __future__ import annotations


class FinslerError(Exception):
    """Base class for every error raised by finslerprod."""


class DomainError(FinslerError, ValueError):
    """A primitive or metric was evaluated outside its domain."""


class OrderExceededError(FinslerError, ValueError):
    """A derivative was requested beyond the order carried by a jet."""


class SingularMatrixError(FinslerError, ArithmeticError):
    """A fundamental tensor (or factor Hessian) is numerically singular."""


class SceneError(FinslerError, ValueError):
    """Scene file violates the schema. ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
