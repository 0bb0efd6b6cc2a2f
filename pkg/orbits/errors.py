"""Error hierarchy for the orbits pipeline.

Every failure the numerics can report has its own class so callers can decide
whether to retry (larger m, smaller step), fall back, or abort. The grouping
bases map onto CLI exit codes.
"""

from __future__ import annotations

from typing import Any


class OrbitsError(Exception):
    """Base class for all orbits errors."""

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.message = message
        self.details: dict[str, Any] = details

    def to_dict(self) -> dict[str, Any]:
        """Machine-readable form used by the CLI error output."""
        return {"error": type(self).__name__, "message": self.message, "details": self.details}


class InputError(OrbitsError):
    """Invalid configuration or model (exit code 2)."""


class PropertyViolation(OrbitsError):
    """A checked property of the computation failed (exit code 4)."""


# ─── Input ───────────────────────────────────────────────────────


class ConfigError(InputError):
    """Run configuration is malformed or inconsistent."""


class ModelValidationError(InputError):
    """Kinetic matrix not positive definite, or Fourier table malformed."""


# ─── Model core ──────────────────────────────────────────────────


class NewtonDivergence(OrbitsError):
    """A Newton iteration hit its iteration limit."""


class EnergyDriftExceeded(OrbitsError):
    """Energy drift stayed above tolerance after all step doublings."""


class NotClosed(OrbitsError):
    """Trajectory does not close up in phase space."""


class DegenerateDeflation(OrbitsError):
    """All four multipliers sit within the margin of 1."""


# ─── Reduction ───────────────────────────────────────────────────


class OutsideEnergyShell(OrbitsError):
    """H(x1, y1, x2, .) = E has no real root."""


class BranchViolation(OrbitsError):
    """dH/dy2 has the wrong sign at the selected root."""


class MomentumSolveFailure(OrbitsError):
    """xdot = dHbar/dy1 could not be inverted."""


# ─── Discrete action ─────────────────────────────────────────────


class BvpNonConvergence(OrbitsError):
    """Sub-arc boundary value problem has no unique minimiser at this m."""


class StripExit(OrbitsError):
    """An arc left the validated strip of x1 values."""


class EigenFailure(OrbitsError):
    """Dense eigensolver broke down."""


class NotCritical(OrbitsError):
    """Configuration residual above tolerance where a critical one is required."""


# ─── Classification / continuation / perturbation ───────────────


class NoMinimumFound(OrbitsError):
    """Every multistart candidate failed."""


class CriterionDisagreement(PropertyViolation):
    """Variational and Floquet verdicts disagree."""


class StepFailure(OrbitsError):
    """Continuation corrector diverged at the minimal step."""


class DegenerateSeed(OrbitsError):
    """Branch seed has lambda0 below the degeneracy threshold."""


class AuditMismatch(PropertyViolation):
    """A cold-start audit found a global minimum no branch explains."""


class NonUniqueMinimizer(OrbitsError):
    """Base point lies outside a smooth window of the action profile."""
