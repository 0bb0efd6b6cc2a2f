"""Corner size of non-minimal loops versus their action excess.

Off the minimiser the loop through x0 = x* + delta closes up with a velocity
jump at tau = 0. The jump is expected to scale like the square root of
F(x0, E) - min F.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from orbits.classifier.minima import MinimizerRecord
from orbits.classifier.profile import solve_base
from orbits.discrete.configuration import Configuration, evaluate
from orbits.model.dynamics import phase_geometry
from orbits.reduction.system import ReducedSystem

logger = logging.getLogger(__name__)


@dataclass
class CornerFit:
    samples: list[tuple[float, float]] = field(default_factory=list)   # (delta F, corner)
    offsets: list[float] = field(default_factory=list)
    fitted_theta: float = float("nan")
    fitted_exponent: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "samples": [list(s) for s in self.samples],
            "offsets": list(self.offsets),
            "fitted_theta": self.fitted_theta,
            "fitted_exponent": self.fitted_exponent,
        }


def _tau_slope(rs: ReducedSystem, z: NDArray) -> float:
    """dx1/dtau = v1 / (sigma v2) at a phase state."""
    v = phase_geometry(rs.model, z, second_order=False).v
    return float(v[0] / (rs.branch_orientation * v[1]))


def corner_size(cfg: Configuration, rs: ReducedSystem) -> tuple[float, float]:
    """Total action and velocity jump at tau = 0 of a configuration's loop."""
    evaluation = evaluate(cfg, rs)
    batch = evaluation.arcs.batch
    jump = abs(_tau_slope(rs, batch.start[0]) - _tau_slope(rs, batch.end[cfg.m - 1]))
    return float(evaluation.total_action[0]), jump


def corner_probe(
    rs: ReducedSystem, record: MinimizerRecord, offsets: Sequence[float]
) -> CornerFit:
    """Fit corner ~ theta * (delta F) ** exponent over the given offsets."""
    fit = CornerFit(offsets=[float(d) for d in offsets])
    base = record.configuration
    for delta in offsets:
        if delta == 0:
            _, jump = corner_size(base, rs)
            fit.samples.append((0.0, jump))
            continue
        init = base.with_points(base.points + delta, momenta=base.momenta)
        cfg = solve_base(rs, base.x0 + delta, init)
        action, jump = corner_size(cfg, rs)
        fit.samples.append((action - record.action, jump))
        logger.debug(f"delta={delta:.3e}: dF={action - record.action:.3e}, corner={jump:.3e}")

    usable = np.array([(dF, c) for dF, c in fit.samples if dF > 0 and c > 0])
    if len(usable) >= 2:
        log_dF, log_c = np.log(usable[:, 0]), np.log(usable[:, 1])
        slope, intercept = np.polyfit(log_dF, log_c, 1)
        fit.fitted_exponent = float(slope)
        fit.fitted_theta = float(np.exp(intercept))
    else:
        logger.warning("Fewer than two positive corner samples; no fit")
    logger.info(
        f"Corner fit at x*={record.x_star:.6f}: exponent {fit.fitted_exponent:.4f}, "
        f"theta {fit.fitted_theta:.4f}"
    )
    return fit
