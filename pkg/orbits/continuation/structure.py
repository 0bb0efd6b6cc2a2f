"""Global structure of the minimisers over an energy interval.

Branches are seeded from the global minima at the lower energy and continued
across the interval. Cold-start audits on a coarse sub-grid catch branches
born inside the interval. Exchanges of the global minimum between two
branches are located by root-finding on their action gap.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from orbits.classifier.minima import (
    MinimizerRecord,
    VariationalVerdict,
    _cyclic_distance,
    classify,
    find_minima,
)
from orbits.config import ContinuationConfig
from orbits.continuation.branch import Branch, _energy_grid, continue_branch, correct
from orbits.discrete.configuration import total_action
from orbits.engine.executor import run_parallel
from orbits.errors import AuditMismatch, OrbitsError
from orbits.reduction.system import ReducedFamily

logger = logging.getLogger(__name__)


@dataclass
class CrossingEvent:
    """Energy where two branches exchange the global minimum."""

    E_star: float
    branch_a: str
    branch_b: str
    slope_a: float
    slope_b: float
    action: float
    x_a: float
    x_b: float
    verdict_a: str
    verdict_b: str
    lambda0_a: float
    lambda0_b: float
    flags: list[str] = field(default_factory=list)

    @property
    def gap_derivative(self) -> float:
        """d(F_a - F_b)/dE at the crossing."""
        return self.slope_a - self.slope_b

    @property
    def hyperbolic(self) -> bool:
        return self.verdict_a == self.verdict_b == str(VariationalVerdict.HYPERBOLIC)

    def to_dict(self) -> dict:
        return {
            "E_star": self.E_star,
            "branch_a": self.branch_a,
            "branch_b": self.branch_b,
            "slope_a": self.slope_a,
            "slope_b": self.slope_b,
            "gap_derivative": self.gap_derivative,
            "action": self.action,
            "x_a": self.x_a,
            "x_b": self.x_b,
            "verdict_a": self.verdict_a,
            "verdict_b": self.verdict_b,
            "lambda0_a": self.lambda0_a,
            "lambda0_b": self.lambda0_b,
            "hyperbolic": self.hyperbolic,
            "flags": list(self.flags),
        }


@dataclass
class SummaryRow:
    E: float
    n_global: int
    min_action: float
    lambda0: float
    margin: float               # min lambda0 / lambda1 over the global minimisers
    multiplier_modulus: float
    crossing: bool = False

    def to_row(self) -> dict:
        return {
            "E": self.E,
            "n_global_minima": self.n_global,
            "min_action": self.min_action,
            "lambda0": self.lambda0,
            "multiplier_modulus": self.multiplier_modulus,
        }


@dataclass
class StructureReport:
    branches: list[Branch] = field(default_factory=list)
    crossings: list[CrossingEvent] = field(default_factory=list)
    summary: list[SummaryRow] = field(default_factory=list)
    audits: list[dict] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    @property
    def min_margin(self) -> float:
        """Smallest lambda0 / lambda1 over every global minimiser in the summary."""
        return min((row.margin for row in self.summary), default=0.0)

    def to_dict(self) -> dict:
        return {
            "branches": [b.to_dict() for b in self.branches],
            "crossings": [c.to_dict() for c in self.crossings],
            "audits": self.audits,
            "flags": list(self.flags),
        }


# ─── Worker tasks (module level so they pickle) ─────────────────


def _continue_task(args: tuple) -> Branch:
    family, seed, E_range, dE, settings, label = args
    return continue_branch(family, seed, E_range, dE, settings, label)


def _audit_task(args: tuple) -> list[MinimizerRecord]:
    family, energy = args
    return find_minima(family.at(energy), with_monodromy=False)


# ─── Structure ───────────────────────────────────────────────────


def _explains(branch: Branch, record: MinimizerRecord, match: float) -> float | None:
    point = branch.point_at(record.energy)
    if point is None:
        return None
    distance = _cyclic_distance(point.x_star, record.x_star)
    return distance if distance <= match else None


def _seed_branches(
    family: ReducedFamily,
    seeds: list[MinimizerRecord],
    E_range: tuple[float, float],
    settings: ContinuationConfig,
    first_label: int,
    jobs: int,
    flags: list[str],
) -> list[Branch]:
    usable = []
    for seed in seeds:
        if seed.verdict != VariationalVerdict.HYPERBOLIC:
            logger.warning(f"Degenerate global minimum at x*={seed.x_star:.6f}, E={seed.energy}")
            flags.append(f"degenerate_global_minimum@{seed.energy:.10g}")
            continue
        usable.append(seed)
    tasks = [
        (family, seed, E_range, settings.dE, settings, f"B{first_label + k}")
        for k, seed in enumerate(usable)
    ]
    return run_parallel(_continue_task, tasks, jobs)


def _audit(
    family: ReducedFamily,
    branches: list[Branch],
    audit_energies: np.ndarray,
    E_range: tuple[float, float],
    settings: ContinuationConfig,
    jobs: int,
    report: StructureReport,
) -> None:
    tol = family.config.tolerances
    results = run_parallel(_audit_task, [(family, float(E)) for E in audit_energies], jobs)
    for energy, records in zip(audit_energies, results):
        for record in records:
            matches = [
                (b.id, d)
                for b in branches
                if (d := _explains(b, record, settings.match_tolerance)) is not None
            ]
            entry = {
                "E": float(energy),
                "x_star": record.x_star,
                "action": record.action,
                "branch": matches[0][0] if matches else None,
                "deviation": matches[0][1] if matches else None,
            }
            report.audits.append(entry)
            if matches:
                if matches[0][1] > tol.branch_consistency:
                    logger.warning(
                        f"Audit at E={energy:.8f}: branch {matches[0][0]} "
                        f"off by {matches[0][1]:.3e}"
                    )
                continue
            logger.info(
                f"Audit at E={energy:.8f}: unexplained minimum at x*={record.x_star:.6f}"
            )
            try:
                new = _seed_branches(
                    family, [record], E_range, settings, len(branches), 1, report.flags
                )
            except OrbitsError as e:
                raise AuditMismatch(
                    f"global minimum at x*={record.x_star:.6f}, E={energy:.8f} has no branch: {e}",
                    energy=float(energy),
                    x_star=record.x_star,
                ) from e
            branches.extend(new)
            entry["branch"] = new[0].id if new else None
            if not new and record.verdict == VariationalVerdict.HYPERBOLIC:
                raise AuditMismatch(
                    f"global minimum at x*={record.x_star:.6f}, E={energy:.8f} has no branch",
                    energy=float(energy),
                    x_star=record.x_star,
                )


def _mark_global(
    branches: list[Branch], grid: np.ndarray, tie: float
) -> dict[float, list[tuple[Branch, int]]]:
    """Set each branch's global flags; returns the co-global points per grid energy."""
    table: dict[float, list[tuple[Branch, int]]] = {}
    for energy in grid:
        alive = []
        for b in branches:
            for k, p in enumerate(b.points):
                if abs(p.energy - energy) <= 1e-10:
                    alive.append((b, k))
                    break
        if not alive:
            continue
        best = min(b.points[k].action for b, k in alive)
        winners = [(b, k) for b, k in alive if b.points[k].action - best <= tie]
        for b, k in winners:
            b.global_flags[k] = True
        table[float(energy)] = winners
    return table


def _locate_crossing(
    family: ReducedFamily,
    a: Branch,
    b: Branch,
    lo: float,
    hi: float,
    with_monodromy: bool,
) -> tuple[CrossingEvent, tuple[MinimizerRecord, MinimizerRecord]]:
    tol = family.config.tolerances
    cache: dict[float, tuple] = {}

    def solve(energy: float) -> tuple:
        if energy not in cache:
            cfg_a = correct(family, a.nearest(energy).configuration, energy)
            cfg_b = correct(family, b.nearest(energy).configuration, energy)
            cache[energy] = (cfg_a, cfg_b)
        return cache[energy]

    def gap(energy: float) -> float:
        cfg_a, cfg_b = solve(energy)
        rs = family.at(energy)
        return total_action(cfg_a, rs) - total_action(cfg_b, rs)

    E_star = float(brentq(gap, lo, hi, xtol=tol.crossing_resolution))
    cfg_a, cfg_b = solve(E_star)
    rs = family.at(E_star)
    rec_a = classify(cfg_a, rs, with_monodromy=with_monodromy)
    rec_b = classify(cfg_b, rs, with_monodromy=with_monodromy)
    event = CrossingEvent(
        E_star=E_star,
        branch_a=a.id,
        branch_b=b.id,
        slope_a=rec_a.period,
        slope_b=rec_b.period,
        action=0.5 * (rec_a.action + rec_b.action),
        x_a=rec_a.x_star,
        x_b=rec_b.x_star,
        verdict_a=str(rec_a.verdict),
        verdict_b=str(rec_b.verdict),
        lambda0_a=rec_a.lambda0,
        lambda0_b=rec_b.lambda0,
    )
    if abs(event.gap_derivative) <= tol.slope_margin:
        logger.warning(f"Crossing at E*={E_star:.10f} with equal slopes (non-generic)")
        event.flags.append("equal_slopes")
    if not event.hyperbolic:
        logger.warning(f"Crossing at E*={E_star:.10f} is not between two hyperbolic orbits")
        event.flags.append("not_hyperbolic")
    logger.info(
        f"Crossing {a.id}/{b.id} at E*={E_star:.10f}: "
        f"slopes {event.slope_a:.6f} vs {event.slope_b:.6f}"
    )
    return event, (rec_a, rec_b)


def global_structure(
    family: ReducedFamily,
    E_range: tuple[float, float],
    dE: float,
    settings: ContinuationConfig | None = None,
    jobs: int = 1,
    with_monodromy: bool = True,
) -> StructureReport:
    """Branches, crossings and per-energy summary over E_range.

    Raises:
        NoMinimumFound: no minimiser at the lower energy.
        AuditMismatch: an audit finds a global minimum no branch explains.
    """
    settings = settings or ContinuationConfig(dE=dE)
    if settings.dE != dE:
        settings = replace(settings, dE=dE)
    tol = family.config.tolerances
    lo, hi = E_range
    grid = _energy_grid(lo, hi, dE)
    report = StructureReport()

    seeds = find_minima(family.at(lo), with_monodromy=False)
    branches = _seed_branches(family, seeds, E_range, settings, 0, jobs, report.flags)
    audit_energies = np.unique(np.append(grid[:: settings.audit_every], grid[-1]))
    logger.info(
        f"{len(branches)} branch(es) from E={lo}; auditing {audit_energies.size} energies"
    )
    _audit(family, branches, audit_energies, E_range, settings, jobs, report)
    report.branches = branches

    table = _mark_global(branches, grid, tol.global_tie)
    energies = sorted(table)
    crossing_rows: list[SummaryRow] = []
    on_grid: set[float] = set()

    def add_crossing(a: Branch, b: Branch, e_lo: float, e_hi: float) -> None:
        event, records = _locate_crossing(family, a, b, e_lo, e_hi, with_monodromy)
        report.crossings.append(event)
        crossing_rows.append(_crossing_row(event, records))

    single = [len(table[e]) == 1 for e in energies]
    for k, (e0, e1) in enumerate(zip(energies, energies[1:])):
        if not (single[k] and single[k + 1]):
            continue
        a, b = table[e0][0][0], table[e1][0][0]
        if a is not b and a.covers(e1) and b.covers(e0):
            add_crossing(a, b, e0, e1)

    # Runs of tied grid energies: a lone tie between two different winners
    # is a crossing that landed on the grid, a longer run is a symmetric tie.
    k = 0
    while k < len(energies):
        if single[k]:
            k += 1
            continue
        end = k
        while end + 1 < len(energies) and not single[end + 1]:
            end += 1
        tied = sorted({b.id for e in energies[k : end + 1] for b, _ in table[e]})
        if end > k:
            logger.warning(f"Branches {', '.join(tied)} tie over an interval (symmetric model)")
            report.flags.append(f"symmetric_tie:{'/'.join(tied)}")
        elif 0 < k < len(energies) - 1 and single[k - 1] and single[k + 1]:
            e_prev, e_tie, e_next = energies[k - 1], energies[k], energies[k + 1]
            a, b = table[e_prev][0][0], table[e_next][0][0]
            if a is not b and {a.id, b.id} <= set(tied) and a.covers(e_next) and b.covers(e_prev):
                add_crossing(a, b, e_prev, e_next)
                on_grid.add(e_tie)
            else:
                logger.info(f"Isolated tie at E={e_tie:.8f} without an exchange")
        k = end + 1
    report.crossings.sort(key=lambda c: c.E_star)

    rows = []
    for energy in energies:
        if energy in on_grid:
            continue
        winners = [b.points[k] for b, k in table[energy]]
        rows.append(
            SummaryRow(
                E=energy,
                n_global=len(winners),
                min_action=min(p.action for p in winners),
                lambda0=min(p.lambda0 for p in winners),
                margin=min(p.lambda0 / p.lambda1 if p.lambda1 > 0 else 0.0 for p in winners),
                multiplier_modulus=min(p.multiplier for p in winners),
            )
        )
    report.summary = sorted(rows + crossing_rows, key=lambda r: r.E)
    return report


def _crossing_row(
    event: CrossingEvent, records: tuple[MinimizerRecord, MinimizerRecord]
) -> SummaryRow:
    return SummaryRow(
        E=event.E_star,
        n_global=2,
        min_action=event.action,
        lambda0=min(r.lambda0 for r in records),
        margin=min(r.margin for r in records),
        multiplier_modulus=min(float(np.max(np.abs(r.reduced_multipliers))) for r in records),
        crossing=True,
    )
