"""orbits main entry point: batch CLI over the minimal-orbit pipeline.

Commands:
  orbits validate --config run.json   Check the model (SPD kinetic matrix, m_L)
  orbits solve    --config run.json   Global minimisers at one energy
  orbits sweep    --config run.json   Branches and crossings over an energy range
  orbits perturb  --config run.json   Monte-Carlo nondegeneracy of Fourier perturbations

Exit codes: 0 success, 2 invalid config or model, 3 I/O, 4 property violation.
Only machine-readable JSON goes to stdout; logs and tables go to stderr.
"""

from __future__ import annotations

import logging
import os
import sys
from collections.abc import Callable
from pathlib import Path

import click
from rich.console import Console
from rich.logging import RichHandler

from orbits import __version__
from orbits.classifier.minima import find_minima
from orbits.classifier.profile import action_profile
from orbits.classifier.verifier import classify_equivalence
from orbits.config import LOG_LEVELS, RunConfig, load_config
from orbits.continuation.structure import global_structure
from orbits.delivery.formatter import (
    minimizer_table,
    montecarlo_table,
    structure_table,
    validation_table,
)
from orbits.delivery.store import ResultStore, canonical_json
from orbits.errors import (
    ConfigError,
    CriterionDisagreement,
    InputError,
    OrbitsError,
    PropertyViolation,
)
from orbits.model.spec import ModelSpec
from orbits.perturbation.montecarlo import monte_carlo_nondegeneracy
from orbits.reduction.system import ReducedFamily, ReducedSystem

console = Console(stderr=True)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INPUT = 2
EXIT_IO = 3
EXIT_PROPERTY = 4


# ─── Plumbing ────────────────────────────────────────────────────


def _setup_logging(verbose: bool = False, level: str | None = None) -> None:
    """Configure structured logging with Rich on stderr."""
    level = (level or os.getenv("ORBITS_LOG") or "WARNING").upper()
    if level not in LOG_LEVELS:
        level = "WARNING"
    logging.basicConfig(
        level=logging.DEBUG if verbose else getattr(logging, level),
        format="%(message)s",
        handlers=[RichHandler(console=console, rich_tracebacks=True, show_path=False)],
    )
    if not verbose:
        logging.getLogger().setLevel(getattr(logging, level))


def _emit(payload: dict) -> None:
    click.echo(canonical_json(payload), nl=False)


def _error_payload(error: Exception) -> dict:
    if isinstance(error, OrbitsError):
        return error.to_dict()
    details = {}
    if isinstance(error, OSError) and error.filename is not None:
        details["path"] = str(error.filename)
    return {"error": type(error).__name__, "message": str(error), "details": details}


def _exit_code(error: Exception) -> int:
    if isinstance(error, InputError):
        return EXIT_INPUT
    if isinstance(error, PropertyViolation):
        return EXIT_PROPERTY
    if isinstance(error, OSError):
        return EXIT_IO
    return EXIT_FAILURE


def _run(
    command: str,
    config_path: Path,
    out: Path | None,
    jobs: int | None,
    verbose: bool,
    body: Callable[[RunConfig, ModelSpec, ResultStore], dict],
) -> None:
    """Load config and model, run ``body``, map failures to exit codes."""
    _setup_logging(verbose)
    store: ResultStore | None = None
    try:
        config = load_config(config_path)
        if jobs is not None:
            config.jobs = jobs
        config.validate(command)
        if not verbose:
            logging.getLogger().setLevel(getattr(logging, config.log_level.upper()))
        model = ModelSpec.load(config.model_file)
        store = ResultStore(out if out is not None else config.output_path)
        summary = body(config, model, store)
        if store.written:
            store.write_metadata(command, config_path)
    except (OrbitsError, OSError, ValueError, ArithmeticError) as e:
        if store is not None and store.written:
            store.write_metadata(command, config_path)
        logger.error(f"{command} failed: {e}")
        _emit(_error_payload(e))
        sys.exit(_exit_code(e))
    _emit({"command": command, "status": "ok", **summary})
    sys.exit(EXIT_OK)


def _common_options(fn: Callable) -> Callable:
    fn = click.option("--verbose", "-v", is_flag=True, help="Enable debug logging.")(fn)
    fn = click.option(
        "--jobs", type=int, default=None, help="Parallel workers (0 = all cores)."
    )(fn)
    fn = click.option(
        "--out", type=click.Path(path_type=Path), default=None, help="Output directory."
    )(fn)
    fn = click.option(
        "--config",
        "config_path",
        type=click.Path(path_type=Path),
        required=True,
        help="Run configuration JSON.",
    )(fn)
    return fn


# ─── Command bodies ──────────────────────────────────────────────


def _validate_body(config: RunConfig, model: ModelSpec, store: ResultStore) -> dict:
    report = model.validate(config.solver.discretization.validation_grid)
    console.print(validation_table(report, str(config.model_file)))
    return {"validation": report.to_dict()}


def _check_energy(model: ModelSpec, energy: float, grid: int) -> None:
    v_max = model.validate(grid).potential_range[1]
    if not energy > v_max:
        raise ConfigError(
            f"energy {energy} must exceed max V = {v_max:.6g}",
            field="energy",
            max_potential=v_max,
        )


def _solve_body(config: RunConfig, model: ModelSpec, store: ResultStore) -> dict:
    assert config.energy is not None
    _check_energy(model, config.energy, config.solver.discretization.validation_grid)
    rs = ReducedSystem(model=model, energy=config.energy, config=config.solver)
    profile = action_profile(rs)
    records = find_minima(
        rs, with_monodromy=config.monodromy, refine=config.refine, profile=profile
    )
    reports = [classify_equivalence(r, strict=False) for r in records]

    minimizers = []
    for record, report in zip(records, reports):
        entry = record.to_dict()
        entry["equivalence"] = report.to_dict()
        minimizers.append(entry)
    store.write_json(
        "minimizers.json",
        {
            "energy": config.energy,
            "minimizers": minimizers,
            "smooth_windows": [list(w) for w in profile.smooth_windows],
        },
    )
    store.write_csv(
        "profile.csv",
        ({"x0": x, "F": f} for x, f in profile.to_rows()),
        ["x0", "F"],
    )
    console.print(minimizer_table(records, reports))

    if failed := [rep for rep in reports if not rep.passed]:
        first = failed[0]
        raise CriterionDisagreement(first.reason, **first.bundle)
    return {"n_minimizers": len(records), "outputs": sorted(p.name for p in store.written)}


def _sweep_body(config: RunConfig, model: ModelSpec, store: ResultStore) -> dict:
    assert config.energy_range is not None
    lo, _ = config.energy_range
    _check_energy(model, lo, config.solver.discretization.validation_grid)
    family = ReducedFamily(model=model, config=config.solver)
    report = global_structure(
        family,
        config.energy_range,
        config.continuation.dE,
        config.continuation,
        jobs=config.workers,
        with_monodromy=config.monodromy,
    )
    store.write_json(
        "branches.json",
        {
            "E_range": list(config.energy_range),
            "branches": [b.to_dict() for b in report.branches],
            "audits": report.audits,
            "flags": list(report.flags),
        },
    )
    store.write_json("crossings.json", {"crossings": [c.to_dict() for c in report.crossings]})
    store.write_csv(
        "summary.csv",
        (row.to_row() for row in report.summary),
        ["E", "n_global_minima", "min_action", "lambda0", "multiplier_modulus"],
    )
    console.print(structure_table(report))
    return {
        "n_branches": len(report.branches),
        "n_crossings": len(report.crossings),
        "outputs": sorted(p.name for p in store.written),
    }


def _perturb_body(config: RunConfig, model: ModelSpec, store: ResultStore) -> dict:
    assert config.energy_range is not None
    pert = config.perturbation
    report = monte_carlo_nondegeneracy(
        model,
        epsilon=pert.epsilon,
        n_samples=pert.samples,
        E_range=config.energy_range,
        seed=pert.seed,
        config=config.solver,
        settings=config.continuation,
        alpha=pert.alpha,
        min_samples=pert.min_samples,
        jobs=config.workers,
    )
    store.write_json("perturbation.json", report.to_dict())
    console.print(montecarlo_table(report))
    return {
        "fraction": report.fraction,
        "ci": list(report.ci),
        "outputs": sorted(p.name for p in store.written),
    }


# ─── CLI Commands ────────────────────────────────────────────────


@click.group()
@click.version_option(__version__, prog_name="orbits")
def cli() -> None:
    """Minimal periodic orbits of Tonelli Lagrangians on the two-torus."""
    pass


@cli.command()
@_common_options
def validate(config_path: Path, out: Path | None, jobs: int | None, verbose: bool) -> None:
    """Validate the model: positive-definite kinetic matrix and its bound m_L."""
    _run("validate", config_path, out, jobs, verbose, _validate_body)


@cli.command()
@_common_options
def solve(config_path: Path, out: Path | None, jobs: int | None, verbose: bool) -> None:
    """Find and classify the global minimisers at the configured energy."""
    _run("solve", config_path, out, jobs, verbose, _solve_body)


@cli.command()
@_common_options
def sweep(config_path: Path, out: Path | None, jobs: int | None, verbose: bool) -> None:
    """Continue minimising branches over the energy range and locate crossings."""
    _run("sweep", config_path, out, jobs, verbose, _sweep_body)


@cli.command()
@_common_options
def perturb(config_path: Path, out: Path | None, jobs: int | None, verbose: bool) -> None:
    """Monte-Carlo nondegeneracy fraction of random Fourier perturbations."""
    _run("perturb", config_path, out, jobs, verbose, _perturb_body)


# ─── Direct execution ───────────────────────────────────────────

if __name__ == "__main__":
    cli()
