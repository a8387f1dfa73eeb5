"""Input validation helpers and the error types surfaced to callers."""

from __future__ import annotations

from typing import Sequence, Sized

from sklearn.exceptions import NotFittedError

__all__ = [
    "DataError",
    "DivergenceError",
    "NotFittedError",
    "check_fitted",
    "check_probability",
    "check_same_length",
]


class DataError(ValueError):
    """Malformed or inconsistent input data (bad file, misaligned corpus...)."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"non-finite loss at step {step}")


def check_same_length(a: Sized, b: Sized, what_a: str, what_b: str) -> None:
    if len(a) != len(b):
        raise DataError(
            f"{what_a} has {len(a)} entries but {what_b} has {len(b)}"
        )


def check_probability(x: float, name: str) -> None:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {x!r}")


def check_fitted(estimator, attributes: Sequence[str]) -> None:
    """Raise NotFittedError unless every fitted attribute is present."""
    missing = [a for a in attributes if not hasattr(estimator, a)]
    if missing:
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; "
            f"call fit() before using this method"
        )
