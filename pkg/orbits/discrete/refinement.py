"""Choosing m: node doubling until sub-arcs are unique and the action settles."""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from orbits.discrete.configuration import Configuration, evaluate
from orbits.discrete.subarc import direct_guess, solve_arcs
from orbits.errors import BvpNonConvergence, OrbitsError
from orbits.reduction.system import ReducedSystem

logger = logging.getLogger(__name__)

Polisher = Callable[[Configuration], Configuration]


@dataclass
class RefinementReport:
    m: int
    action: float
    action_change: float
    unique: bool
    max_momentum_gap: float
    history: list[tuple[int, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "action": self.action,
            "action_change": self.action_change,
            "unique": self.unique,
            "max_momentum_gap": self.max_momentum_gap,
            "history": [list(item) for item in self.history],
        }


def refine_configuration(cfg: Configuration, rs: ReducedSystem) -> Configuration:
    """Double m by inserting the midpoint of every sub-arc.

    The midpoints come from the recorded arcs, so a critical configuration
    stays critical (up to integration error) and the momenta carry over as
    an exact warm start.
    """
    substeps = rs.discretization.substeps
    if substeps % 2:
        raise ValueError(f"refinement needs an even substep count, got {substeps}")
    evaluation = evaluate(cfg, rs, record=True)
    samples = evaluation.arcs.batch.samples
    mid = samples[:, substeps // 2]
    points = np.empty(2 * cfg.m)
    momenta = np.empty(2 * cfg.m)
    points[0::2] = cfg.points
    points[1::2] = mid[:, 0]
    momenta[0::2] = evaluation.momentum[0]
    momenta[1::2] = mid[:, 2]
    return Configuration(points=points, energy=cfg.energy, lift=cfg.lift, momenta=momenta)


def arcs_unique(cfg: Configuration, rs: ReducedSystem) -> tuple[bool, float]:
    """Re-solve every sub-arc from the direct-method seed and compare momenta."""
    evaluation = evaluate(cfg, rs)
    arcs = evaluation.arcs
    h = 2.0 * np.pi / cfg.m
    seeds = [
        direct_guess(rs, float(a), float(b), float(t), h)
        for a, b, t in zip(arcs.x, arcs.x_prime, arcs.tau0)
    ]
    second = solve_arcs(rs, arcs.x, arcs.x_prime, arcs.tau0, h, guess=seeds)
    gap = float(np.max(np.abs(second.momentum - arcs.momentum)))
    return gap <= rs.tolerances.uniqueness, gap


def select_m(
    cfg: Configuration, rs: ReducedSystem, polish: Polisher | None = None
) -> tuple[Configuration, RefinementReport]:
    """Double m until every sub-arc is unique and F changes by less than the tolerance.

    ``polish`` re-solves the refined configuration (the classifier passes its
    full Newton corrector); without it the interleaved configuration is used.

    Raises:
        BvpNonConvergence: m_max reached without passing both tests.
    """
    disc = rs.discretization
    tol = rs.tolerances.refinement
    history: list[tuple[int, float]] = []
    current = cfg
    for _ in range(disc.max_doublings + 1):
        try:
            action = float(evaluate(current, rs).total_action[0])
            unique, gap = arcs_unique(current, rs)
        except OrbitsError as e:
            logger.info(f"m={current.m} rejected: {e}")
            unique, gap, action = False, float("inf"), float("nan")
        history.append((current.m, action))
        if 2 * current.m > disc.m_max:
            break
        refined = refine_configuration(current, rs)
        if polish is not None:
            refined = polish(refined)
        refined_action = float(evaluate(refined, rs).total_action[0])
        change = abs(refined_action - action)
        logger.info(
            f"m={current.m}: F={action:.12f}, change on doubling {change:.3e}, "
            f"momentum gap {gap:.3e}"
        )
        if unique and change < tol:
            return current, RefinementReport(current.m, action, change, unique, gap, history)
        current = refined
    raise BvpNonConvergence(
        f"no m up to {disc.m_max} passed the uniqueness and refinement tests",
        history=history,
    )
