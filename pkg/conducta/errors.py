"""
Conducta Errors
===============

Exception hierarchy shared by the numerical library and the CLI commands.
Validation problems are collected into a list of Violation records so that a
single failed check reports every broken invariant at once.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class Violation:
    """One broken invariant: a short code, a message, and the offending component."""

    code: str
    message: str
    component: int | None = None

    def as_dict(self):
        return {"code": self.code, "message": self.message, "component": self.component}


class ConductaError(Exception):
    """Base class for every error raised by the toolkit."""


class ValidationError(ConductaError):
    """Input violates a documented invariant. Maps to CLI exit code 1."""

    def __init__(self, violations):
        self.violations = list(violations)
        text = "; ".join(
            f"{v.code}: {v.message}" + (f" (component {v.component})" if v.component is not None else "")
            for v in self.violations
        )
        super().__init__(text or "validation failed")


class GeometryError(ConductaError):
    """Malformed curve or impossible geometric request."""


class EvaluationError(ConductaError):
    """Field requested at a point where it is not defined (on a curve, wrong region)."""


class NumericalError(ConductaError):
    """Numerical failure. Maps to CLI exit code 2."""


class ResonanceError(NumericalError):
    """System is singular at working precision (near an interior resonance)."""

    def __init__(self, message, condition=None, mode=None):
        self.condition = condition
        self.mode = mode
        super().__init__(message)


class RankError(NumericalError):
    """A least-squares fit or Gram matrix lost rank."""


class RegularizationError(NumericalError):
    """The requested discrepancy level cannot be reached."""
