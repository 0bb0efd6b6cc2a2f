"""Floquet analysis of periodic orbits of the full two-degree-of-freedom flow."""

from __future__ import annotations

import logging
from dataclasses import dataclass
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        __str__ = str.__str__
        __format__ = str.__format__

import numpy as np
from numpy.typing import NDArray

from orbits.errors import DegenerateDeflation, NotClosed
from orbits.model.dynamics import TWO_PI, Trajectory, flow_with_variations
from orbits.model.spec import ModelSpec

logger = logging.getLogger(__name__)


class FloquetVerdict(StrEnum):
    HYPERBOLIC = "Hyperbolic"
    NON_HYPERBOLIC = "NonHyperbolic"


@dataclass
class MonodromyResult:
    """Linearised period map and its multipliers."""

    matrix: NDArray                 # (4, 4)
    multipliers: NDArray            # (4,) complex
    transverse_pair: NDArray        # (2,) complex
    verdict: FloquetVerdict
    determinant: float
    degenerate: bool = False
    period: float = 0.0

    @property
    def modulus(self) -> float:
        """Largest transverse multiplier modulus."""
        return float(np.max(np.abs(self.transverse_pair)))

    @property
    def residue(self) -> float:
        """Greene's residue (2 - trace of the transverse block) / 4."""
        return float((2.0 - np.sum(self.transverse_pair).real) / 4.0)

    def to_dict(self) -> dict:
        return {
            "matrix": self.matrix.tolist(),
            "multipliers": [[float(z.real), float(z.imag)] for z in self.multipliers],
            "transverse_pair": [[float(z.real), float(z.imag)] for z in self.transverse_pair],
            "verdict": str(self.verdict),
            "determinant": self.determinant,
            "degenerate": self.degenerate,
            "period": self.period,
            "modulus": self.modulus,
            "residue": self.residue,
        }


def deflate(multipliers: NDArray, margin: float) -> tuple[NDArray, FloquetVerdict, bool]:
    """Drop the two multipliers closest to 1 in log-distance and classify the rest."""
    lam = np.asarray(multipliers, dtype=complex)
    distance = np.abs(np.log(lam))
    order = np.argsort(distance, kind="stable")
    transverse = lam[order[2:]]
    degenerate = bool(np.all(distance < margin))
    hyperbolic = not degenerate and float(np.max(np.abs(transverse))) >= 1.0 + margin
    verdict = FloquetVerdict.HYPERBOLIC if hyperbolic else FloquetVerdict.NON_HYPERBOLIC
    return transverse, verdict, degenerate


def monodromy(
    model: ModelSpec,
    periodic_orbit: Trajectory,
    closure_tolerance: float = 1e-5,
    hyperbolicity_margin: float = 1e-4,
    strict: bool = False,
) -> MonodromyResult:
    """Monodromy matrix of a closed orbit from the variational equations.

    Raises:
        NotClosed: the orbit misses its start by more than closure_tolerance.
        DegenerateDeflation: only with ``strict``, when all multipliers sit at 1.
    """
    orbit = periodic_orbit
    shift = TWO_PI * np.asarray(orbit.winding, dtype=float)
    gap_x = orbit.positions[-1] - orbit.positions[0] - shift
    gap_v = orbit.velocities[-1] - orbit.velocities[0]
    closure = float(max(np.max(np.abs(gap_x)), np.max(np.abs(gap_v))))
    if closure > closure_tolerance:
        raise NotClosed(
            f"orbit closure error {closure:.3e} exceeds {closure_tolerance:.1e}",
            closure=closure,
        )

    z0 = np.concatenate([orbit.positions[0], orbit.momenta[0]])
    _, matrix = flow_with_variations(model, z0, orbit.period, orbit.steps)
    multipliers = np.linalg.eigvals(matrix)
    determinant = float(np.linalg.det(matrix))
    if abs(determinant - 1.0) > 1e-8:
        logger.warning(f"Monodromy determinant {determinant:.12f} deviates from 1")

    transverse, verdict, degenerate = deflate(multipliers, hyperbolicity_margin)
    if degenerate:
        logger.info("All Floquet multipliers within margin of 1; orbit flagged degenerate")
        if strict:
            raise DegenerateDeflation(
                "all four multipliers lie within the hyperbolicity margin of 1",
                multipliers=[[float(z.real), float(z.imag)] for z in multipliers],
            )
    logger.debug(f"Monodromy multipliers {multipliers}, verdict {verdict}")
    return MonodromyResult(
        matrix=matrix,
        multipliers=multipliers,
        transverse_pair=transverse,
        verdict=verdict,
        determinant=determinant,
        degenerate=degenerate,
        period=orbit.period,
    )
