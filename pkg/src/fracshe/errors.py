"""Exception types shared across the package.

The CLI maps these onto exit codes: domain errors to 1, accuracy,
stability and estimation errors to 2.
"""

from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the region where a formula is defined."""


class AccuracyError(RuntimeError):
    """A numerical procedure could not reach its declared tolerance."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class StabilityError(RuntimeError):
    """A simulated path blew up."""

    def __init__(self, message: str, t: float, x: float):
        super().__init__(message)
        self.t = t
        self.x = x


class EstimationError(RuntimeError):
    """A statistical estimate cannot be formed from the data given."""
