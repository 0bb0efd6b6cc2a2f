"""Delivery formatter: rich console summaries per command."""

from __future__ import annotations

from rich.table import Table

from orbits.classifier.minima import MinimizerRecord
from orbits.classifier.verifier import EquivalenceReport
from orbits.continuation.structure import StructureReport
from orbits.model.spec import ValidationReport
from orbits.perturbation.montecarlo import MonteCarloReport


def validation_table(report: ValidationReport, path: str) -> Table:
    table = Table(title=f"Model {path}", show_header=False)
    table.add_row("m_L (min eigenvalue of A)", f"{report.m_L:.6g}")
    table.add_row("worst grid point", f"({report.worst_point[0]:.4f}, {report.worst_point[1]:.4f})")
    table.add_row("grid", f"{report.grid} x {report.grid}")
    lo, hi = report.potential_range
    table.add_row("potential range", f"[{lo:.6g}, {hi:.6g}]")
    return table


def minimizer_table(
    records: list[MinimizerRecord], reports: list[EquivalenceReport] | None = None
) -> Table:
    table = Table(title="Global minimisers")
    for column in ("x*", "F", "lambda0", "lambda1", "F''", "period", "|mu|", "verdict", "check"):
        table.add_column(column, justify="right")
    reports = reports or [None] * len(records)
    for record, report in zip(records, reports):
        modulus = "-" if record.monodromy is None else f"{record.monodromy.modulus:.6f}"
        check = "-" if report is None else ("[green]ok[/]" if report.passed else "[red]FAIL[/]")
        table.add_row(
            f"{record.x_star:.8f}",
            f"{record.action:.10f}",
            f"{record.lambda0:.3e}",
            f"{record.lambda1:.3e}",
            f"{record.hessian_F:.3e}",
            f"{record.period:.6f}",
            modulus,
            str(record.verdict),
            check,
        )
    return table


def structure_table(report: StructureReport) -> Table:
    table = Table(title="Energy sweep")
    for column in ("E", "n_global", "min F", "lambda0", "|mu|", ""):
        table.add_column(column, justify="right")
    for row in report.summary:
        table.add_row(
            f"{row.E:.10f}",
            str(row.n_global),
            f"{row.min_action:.10f}",
            f"{row.lambda0:.3e}",
            f"{row.multiplier_modulus:.6f}",
            "[yellow]crossing[/]" if row.crossing else "",
        )
    return table


def montecarlo_table(report: MonteCarloReport) -> Table:
    lo, hi = report.ci
    table = Table(title=f"Perturbation sweep (seed {report.seed})", show_header=False)
    table.add_row("samples", str(report.n_samples))
    table.add_row("epsilon", f"{report.epsilon:g}")
    table.add_row("nondegenerate fraction", f"{report.fraction:.4f}")
    table.add_row(f"{100 * (1 - report.alpha):.0f}% Wilson interval", f"[{lo:.4f}, {hi:.4f}]")
    table.add_row("failures", str(len(report.failures)))
    return table
