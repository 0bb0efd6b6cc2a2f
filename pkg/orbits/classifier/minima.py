"""Minimal configurations at fixed energy and their classification."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        __str__ = str.__str__
        __format__ = str.__format__
from typing import TYPE_CHECKING

import numpy as np
from numpy.typing import ArrayLike

from orbits.classifier.profile import (
    ActionProfile,
    _as_configuration,
    action_profile,
    newton_rows,
    polish_configuration,
)
from orbits.discrete.configuration import Configuration, ConfigurationEval, evaluate
from orbits.discrete.jacobi import JacobiMatrix, jacobi_from_eval
from orbits.discrete.refinement import RefinementReport, select_m
from orbits.errors import NoMinimumFound, OrbitsError
from orbits.model.dynamics import integrate_el, velocity_from_momentum
from orbits.model.monodromy import MonodromyResult, monodromy
from orbits.reduction.system import ReducedSystem

if TYPE_CHECKING:
    from orbits.classifier.corner import CornerFit

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


class VariationalVerdict(StrEnum):
    HYPERBOLIC = "Hyperbolic"
    DEGENERATE = "Degenerate"


@dataclass
class MinimizerRecord:
    """A global minimiser of F(., E) with both hyperbolicity verdicts."""

    x_star: float
    energy: float
    configuration: Configuration
    action: float
    jacobi: JacobiMatrix
    hessian_F: float
    verdict: VariationalVerdict
    period: float
    residual: float
    reduced_multipliers: np.ndarray
    monodromy: MonodromyResult | None = None
    corner_fit: CornerFit | None = None
    refinement: RefinementReport | None = None
    flags: list[str] = field(default_factory=list)

    @property
    def lambda0(self) -> float:
        return self.jacobi.lambda0

    @property
    def lambda1(self) -> float:
        return self.jacobi.lambda1

    @property
    def spectrum_gap(self) -> float:
        return self.jacobi.spectrum_gap

    @property
    def margin(self) -> float:
        """lambda0 / lambda1, the relative distance from degeneracy."""
        return self.lambda0 / self.lambda1 if self.lambda1 > 0 else 0.0

    def to_dict(self) -> dict:
        return {
            "x_star": self.x_star,
            "energy": self.energy,
            "action": self.action,
            "lambda0": self.lambda0,
            "lambda1": self.lambda1,
            "spectrum_gap": self.spectrum_gap,
            "hessian_F": self.hessian_F,
            "verdict": str(self.verdict),
            "period": self.period,
            "residual": self.residual,
            "twist": self.jacobi.twist,
            "ground_positive": self.jacobi.ground_positive(),
            "reduced_multipliers": [
                [float(z.real), float(z.imag)] for z in self.reduced_multipliers
            ],
            "configuration": self.configuration.to_dict(),
            "monodromy": None if self.monodromy is None else self.monodromy.to_dict(),
            "corner_fit": None if self.corner_fit is None else self.corner_fit.to_dict(),
            "refinement": None if self.refinement is None else self.refinement.to_dict(),
            "flags": list(self.flags),
        }


def canonical_angle(x: float) -> float:
    return float(np.mod(x, TWO_PI))


def _cyclic_distance(a: float, b: float) -> float:
    d = abs(canonical_angle(a) - canonical_angle(b))
    return min(d, TWO_PI - d)


def variational_verdict(jacobi: JacobiMatrix, threshold: float) -> VariationalVerdict:
    """Hyperbolic iff lambda0 clears the threshold relative to lambda1 and twist holds."""
    scale = max(abs(jacobi.lambda1), 1e-300)
    if jacobi.twist and jacobi.lambda0 > threshold * scale:
        return VariationalVerdict.HYPERBOLIC
    return VariationalVerdict.DEGENERATE


def closing_monodromy(
    rs: ReducedSystem, cfg: ConfigurationEval, x_star: float
) -> MonodromyResult:
    """Close the orbit in the full system from the configuration's first arc."""
    tol = rs.tolerances
    disc = rs.discretization
    z0 = rs.shell_state(x_star, cfg.momentum[0, 0], 0.0)
    x0, y0 = z0[:2], z0[2:]
    v0 = velocity_from_momentum(rs.model, x0, y0, tol=tol.legendre)
    T = float(cfg.period[0])
    orbit = integrate_el(
        rs.model, x0, v0, T,
        steps=disc.orbit_steps,
        drift_tolerance=tol.drift,
        max_doublings=disc.max_doublings,
    )
    return monodromy(
        rs.model, orbit,
        closure_tolerance=tol.closure,
        hyperbolicity_margin=tol.hyperbolicity_margin,
    )


def classify(
    cfg: Configuration,
    rs: ReducedSystem,
    with_monodromy: bool = True,
    refinement: RefinementReport | None = None,
) -> MinimizerRecord:
    """Build the full record of a critical configuration."""
    evaluation = evaluate(cfg, rs)
    jacobi = jacobi_from_eval(evaluation)
    residual = float(np.max(np.abs(evaluation.residual[0])))
    verdict = variational_verdict(jacobi, rs.tolerances.degeneracy_threshold)
    flags: list[str] = []
    if jacobi.lambda0 < -1e-8 * max(abs(jacobi.lambda1), 1.0):
        logger.warning(
            f"Critical point at x0={cfg.x0:.6f} is not a minimum (lambda0={jacobi.lambda0:.3e})"
        )
        flags.append("not_minimum")
    if verdict == VariationalVerdict.HYPERBOLIC and not jacobi.ground_positive():
        flags.append("ground_sign_change")
    try:
        hessian_F = jacobi.schur_complement()
    except np.linalg.LinAlgError:
        hessian_F = float("nan")

    result = None
    if with_monodromy:
        result = closing_monodromy(rs, evaluation, cfg.x0)
        if result.degenerate:
            flags.append("monodromy_degenerate")

    record = MinimizerRecord(
        x_star=canonical_angle(cfg.x0),
        energy=rs.energy,
        configuration=cfg,
        action=float(evaluation.total_action[0]),
        jacobi=jacobi,
        hessian_F=hessian_F,
        verdict=verdict,
        period=float(evaluation.period[0]),
        residual=residual,
        reduced_multipliers=np.linalg.eigvals(evaluation.reduced_monodromy()[0]),
        monodromy=result,
        refinement=refinement,
        flags=flags,
    )
    logger.info(
        f"x*={record.x_star:.8f}: F={record.action:.12f}, lambda0={record.lambda0:.3e}, "
        f"verdict {verdict}"
    )
    return record


def _candidates(profile: ActionProfile, tie: float) -> tuple[list[Configuration], bool]:
    solved = np.isfinite(profile.values)
    if not solved.any():
        raise NoMinimumFound(f"every inner solve failed at E={profile.E}", energy=profile.E)
    flat = profile.oscillation <= tie
    if flat:
        indices = [int(np.nanargmin(profile.values))]
        logger.info(f"Flat action profile at E={profile.E}; one representative candidate")
    else:
        indices = profile.local_minima()
    return [profile.configurations[k] for k in indices], flat


def find_minima(
    rs: ReducedSystem,
    base_points: ArrayLike | None = None,
    with_monodromy: bool = True,
    refine: bool = False,
    profile: ActionProfile | None = None,
) -> list[MinimizerRecord]:
    """Global minimisers of F(., E): grid scan, polish, deduplicate, classify.

    Raises:
        NoMinimumFound: every candidate failed.
    """
    tol = rs.tolerances
    profile = profile if profile is not None else action_profile(rs, base_points)
    candidates, flat = _candidates(profile, tol.global_tie)
    logger.info(f"Polishing {len(candidates)} candidate(s) at E={rs.energy}")

    points = np.stack([c.points for c in candidates])
    polished = newton_rows(rs, points, 0, interior=False, guesses=[c.momenta for c in candidates])
    found: list[tuple[Configuration, float]] = []
    for cand, item in zip(candidates, polished):
        if item is None:
            logger.warning(f"Candidate near x0={cand.x0:.6f} failed to polish; dropped")
            continue
        found.append((_as_configuration(item, rs, 0), float(item[1].total_action[0])))
    if not found:
        raise NoMinimumFound(f"no candidate polished at E={rs.energy}", energy=rs.energy)

    found.sort(key=lambda item: canonical_angle(item[0].x0))
    unique: list[tuple[Configuration, float]] = []
    for cfg, action in found:
        if all(_cyclic_distance(cfg.x0, other.x0) > tol.dedup for other, _ in unique):
            unique.append((cfg, action))
    best = min(action for _, action in unique)
    global_minima = [(cfg, a) for cfg, a in unique if a - best <= tol.global_tie]

    records = []
    for cfg, _ in global_minima:
        report = None
        if refine:
            try:
                cfg, report = select_m(cfg, rs, polish=lambda c: polish_configuration(c, rs))
            except OrbitsError as e:
                logger.warning(f"Refinement at x0={cfg.x0:.6f} failed: {e}")
        record = classify(cfg, rs, with_monodromy=with_monodromy, refinement=report)
        if flat:
            record.flags.append("flat_profile")
        if len(global_minima) >= 2:
            record.flags.append("symmetric_tie")
        records.append(record)
    if len(global_minima) > 2:
        logger.warning(f"{len(global_minima)} co-global minima at E={rs.energy}; non-generic tie")
    return records
