"""Natural-parameter continuation of a minimiser in the energy.

Predictor: the configuration at the previous energy. Corrector: full Newton on
the discrete E-L system at the new energy. A failed corrector halves the step
down to dE_min; a step whose minimiser falls below the degeneracy threshold
ends the branch at a recorded degenerate endpoint.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from orbits.classifier.minima import (
    MinimizerRecord,
    VariationalVerdict,
    _cyclic_distance,
    canonical_angle,
    variational_verdict,
)
from orbits.classifier.profile import polish_configuration
from orbits.config import ContinuationConfig
from orbits.discrete.configuration import Configuration, evaluate
from orbits.discrete.jacobi import jacobi_from_eval
from orbits.errors import DegenerateSeed, OrbitsError, StepFailure
from orbits.reduction.system import ReducedFamily

logger = logging.getLogger(__name__)

GRID_MATCH = 1e-10


@dataclass
class BranchPoint:
    energy: float
    x_star: float
    action: float
    lambda0: float
    lambda1: float
    period: float
    multiplier: float
    configuration: Configuration


@dataclass
class Branch:
    """A curve E -> x*(E) of non-degenerate minimal configurations."""

    id: str
    points: list[BranchPoint] = field(default_factory=list)
    global_flags: list[bool] = field(default_factory=list)
    end_reasons: dict[str, str] = field(default_factory=dict)

    @property
    def energies(self) -> np.ndarray:
        return np.array([p.energy for p in self.points])

    @property
    def base_points(self) -> np.ndarray:
        return np.array([p.x_star for p in self.points])

    @property
    def actions(self) -> np.ndarray:
        return np.array([p.action for p in self.points])

    @property
    def lambda0s(self) -> np.ndarray:
        return np.array([p.lambda0 for p in self.points])

    @property
    def periods(self) -> np.ndarray:
        """dF/dE along the branch (the physical period)."""
        return np.array([p.period for p in self.points])

    @property
    def span(self) -> tuple[float, float]:
        return self.points[0].energy, self.points[-1].energy

    def covers(self, energy: float) -> bool:
        lo, hi = self.span
        return lo - GRID_MATCH <= energy <= hi + GRID_MATCH

    def point_at(self, energy: float) -> BranchPoint | None:
        """Stored point at this energy, if the branch stepped onto it."""
        for p in self.points:
            if abs(p.energy - energy) <= GRID_MATCH:
                return p
        return None

    def nearest(self, energy: float) -> BranchPoint:
        return min(self.points, key=lambda p: abs(p.energy - energy))

    def action_at(self, energy: float) -> float:
        """Cubic interpolation of F(x*(E), E) with the periods as derivatives."""
        if len(self.points) == 1:
            return self.points[0].action
        return float(CubicHermiteSpline(self.energies, self.actions, self.periods)(energy))

    def x_at(self, energy: float) -> float:
        if len(self.points) == 1:
            return self.points[0].x_star
        unwrapped = np.unwrap(self.base_points)
        spline = CubicSpline(self.energies, unwrapped) if len(self.points) > 2 else None
        if spline is not None:
            value = spline(energy)
        else:
            value = np.interp(energy, self.energies, unwrapped)
        return canonical_angle(float(value))

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "energies": self.energies.tolist(),
            "base_points": self.base_points.tolist(),
            "actions": self.actions.tolist(),
            "lambda0s": self.lambda0s.tolist(),
            "periods": self.periods.tolist(),
            "multipliers": [p.multiplier for p in self.points],
            "global_flags": list(self.global_flags),
            "end_reasons": dict(self.end_reasons),
        }


def _branch_point(
    cfg: Configuration, family: ReducedFamily
) -> tuple[BranchPoint, VariationalVerdict]:
    rs = family.at(cfg.energy)
    evaluation = evaluate(cfg, rs)
    jacobi = jacobi_from_eval(evaluation)
    multipliers = np.linalg.eigvals(evaluation.reduced_monodromy()[0])
    point = BranchPoint(
        energy=cfg.energy,
        x_star=canonical_angle(cfg.x0),
        action=float(evaluation.total_action[0]),
        lambda0=jacobi.lambda0,
        lambda1=jacobi.lambda1,
        period=float(evaluation.period[0]),
        multiplier=float(np.max(np.abs(multipliers))),
        configuration=cfg,
    )
    return point, variational_verdict(jacobi, rs.tolerances.degeneracy_threshold)


def correct(family: ReducedFamily, cfg: Configuration, energy: float) -> Configuration:
    """Corrector at a new energy from the previous configuration.

    Raises:
        StepFailure: Newton did not converge.
    """
    rs = family.at(energy)
    try:
        return polish_configuration(cfg.at_energy(energy), rs)
    except OrbitsError as e:
        raise StepFailure(f"corrector failed at E={energy:.8f}: {e}", energy=energy) from e


def _energy_grid(lo: float, hi: float, dE: float) -> np.ndarray:
    count = int(np.floor((hi - lo) / dE + 1e-9))
    grid = lo + dE * np.arange(count + 1)
    if hi - grid[-1] > 1e-9 * dE:
        grid = np.append(grid, hi)
    return grid


def _march(
    family: ReducedFamily,
    start: BranchPoint,
    targets: np.ndarray,
    settings: ContinuationConfig,
) -> tuple[list[BranchPoint], str]:
    """Step through the target energies in order, halving on failure."""
    points: list[BranchPoint] = []
    current = start
    for target in targets:
        while abs(target - current.energy) > GRID_MATCH:
            step = target - current.energy
            while True:
                energy = current.energy + step
                try:
                    cfg = correct(family, current.configuration, energy)
                    jump = _cyclic_distance(cfg.x0, current.configuration.x0)
                    if jump > settings.jump_tolerance:
                        raise StepFailure(f"minimiser jumped by {jump:.3e} at E={energy:.8f}")
                    point, verdict = _branch_point(cfg, family)
                    break
                except StepFailure as e:
                    step *= 0.5
                    logger.debug(f"{e}; step halved to {step:.3e}")
                    if abs(step) < settings.dE_min:
                        logger.warning(
                            f"Branch ends near E={current.energy:.8f}: step below dE_min"
                        )
                        return points, "step_failure"
            if verdict != VariationalVerdict.HYPERBOLIC:
                logger.info(f"Degenerate endpoint at E={energy:.8f} (lambda0={point.lambda0:.3e})")
                points.append(point)
                return points, "degenerate"
            points.append(point)
            current = point
    return points, "range_end"


def continue_branch(
    family: ReducedFamily,
    seed: MinimizerRecord,
    E_range: tuple[float, float],
    dE: float,
    settings: ContinuationConfig | None = None,
    label: str = "B0",
) -> Branch:
    """Continue a non-degenerate minimiser over E_range in both directions from its energy.

    Raises:
        DegenerateSeed: the seed's lambda0 is below the degeneracy threshold.
    """
    settings = settings or ContinuationConfig(dE=dE)
    if seed.verdict != VariationalVerdict.HYPERBOLIC:
        raise DegenerateSeed(
            f"seed at x*={seed.x_star:.6f}, E={seed.energy} is degenerate",
            lambda0=seed.lambda0,
        )
    lo, hi = E_range
    start, _ = _branch_point(seed.configuration, family)
    grid = _energy_grid(lo, hi, dE)
    up = grid[grid > seed.energy + GRID_MATCH]
    down = grid[grid < seed.energy - GRID_MATCH][::-1]
    logger.info(f"Continuing branch {label} from x*={seed.x_star:.6f} at E={seed.energy}")

    above, reason_up = _march(family, start, up, settings) if up.size else ([], "range_end")
    below, reason_down = _march(family, start, down, settings) if down.size else ([], "range_end")
    branch = Branch(
        id=label,
        points=below[::-1] + [start] + above,
        end_reasons={"lower": reason_down, "upper": reason_up},
    )
    branch.global_flags = [False] * len(branch.points)
    return branch
