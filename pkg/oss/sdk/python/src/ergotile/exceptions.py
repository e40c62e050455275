"""ergotile exceptions."""

from __future__ import annotations

from typing import Sequence


class ErgotileError(Exception):
    """Base exception for ergotile."""


class ParameterError(ErgotileError):
    """Invalid grid, kernel or tile-system parameters."""


class ConfigError(ErgotileError):
    """Experiment configuration missing, malformed or inconsistent."""


class ValidationError(ConfigError):
    """Configuration failed JSON Schema validation."""

    def __init__(self, message: str, errors: Sequence[str] = ()) -> None:
        super().__init__(message)
        self.errors: tuple[str, ...] = tuple(errors) or (message,)


class ResolutionError(ErgotileError):
    """Analysis scale outside the resolvable band of the sample grid."""


class ScaleError(ErgotileError):
    """Dilated kernel not resolvable at the working resolution."""


class UnsupportedKernelError(ErgotileError):
    """Kernel symbol lacks one-sided limits at the origin."""


class KernelConditionError(ErgotileError):
    """Kernel fails the vanishing condition |K^(xi)| <~ |xi| near zero."""

    def __init__(self, message: str, violation: float) -> None:
        super().__init__(message)
        self.violation = violation


class PreconditionError(ErgotileError):
    """Structural precondition of an operation not met."""


class RepresentationError(ErgotileError):
    """Scale gap too small for the multiplier form of a tree projection."""


class InvariantViolation(ErgotileError):
    """A hard invariant was measured false during an experiment."""
