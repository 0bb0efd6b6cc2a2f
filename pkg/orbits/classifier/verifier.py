"""Cross-validation of the variational verdict against the Floquet verdict."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from orbits.classifier.minima import MinimizerRecord, VariationalVerdict
from orbits.errors import CriterionDisagreement
from orbits.model.monodromy import FloquetVerdict

logger = logging.getLogger(__name__)

_MATCHING = {
    VariationalVerdict.HYPERBOLIC: FloquetVerdict.HYPERBOLIC,
    VariationalVerdict.DEGENERATE: FloquetVerdict.NON_HYPERBOLIC,
}


@dataclass
class EquivalenceReport:
    """Result of comparing the two hyperbolicity verdicts of one minimiser."""

    passed: bool = True
    reason: str = ""
    variational: str = ""
    floquet: str = ""
    bundle: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "reason": self.reason,
            "variational": self.variational,
            "floquet": self.floquet,
            "bundle": self.bundle,
        }


def _diagnostic_bundle(record: MinimizerRecord) -> dict:
    bundle = {
        "x_star": record.x_star,
        "energy": record.energy,
        "eigenvalues": record.jacobi.eigenvalues.tolist(),
        "twist": record.jacobi.twist,
        "residual": record.residual,
        "hessian_F": record.hessian_F,
        "reduced_multipliers": [[float(z.real), float(z.imag)] for z in record.reduced_multipliers],
    }
    if record.monodromy is not None:
        bundle["multipliers"] = [
            [float(z.real), float(z.imag)] for z in record.monodromy.multipliers
        ]
        bundle["determinant"] = record.monodromy.determinant
    return bundle


def classify_equivalence(record: MinimizerRecord, strict: bool = True) -> EquivalenceReport:
    """Check that lambda0 > threshold (with twist) iff the orbit is Floquet-hyperbolic.

    Raises:
        CriterionDisagreement: verdicts differ and ``strict`` is set.
    """
    if record.monodromy is None:
        return EquivalenceReport(
            passed=True,
            reason="Monodromy cross-check disabled",
            variational=str(record.verdict),
        )
    expected = _MATCHING[record.verdict]
    floquet = record.monodromy.verdict
    if floquet == expected:
        return EquivalenceReport(
            passed=True,
            reason="Variational and Floquet verdicts agree",
            variational=str(record.verdict),
            floquet=str(floquet),
        )

    bundle = _diagnostic_bundle(record)
    report = EquivalenceReport(
        passed=False,
        reason=f"Variational verdict {record.verdict} but Floquet verdict {floquet}",
        variational=str(record.verdict),
        floquet=str(floquet),
        bundle=bundle,
    )
    logger.error(
        f"Criterion disagreement at x*={record.x_star:.8f}, E={record.energy}: {report.reason}"
    )
    if strict:
        raise CriterionDisagreement(report.reason, **bundle)
    return report
