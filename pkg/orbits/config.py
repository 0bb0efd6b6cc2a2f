"""Configuration management for orbits runs.

A run is described by a JSON file (see FORMATS.md) naming the model file and
the command parameters. Numerical settings are grouped in ``SolverConfig``,
which travels with every ``ReducedSystem`` so library calls never need a
separate settings argument.

Priority: env vars > config file > defaults.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from dotenv import load_dotenv

from orbits.errors import ConfigError

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

# Lower bounds the numerical layers rely on
_DISCRETIZATION_FLOORS = {
    "direct_nodes": 1,
    "base_grid": 3,
    "orbit_steps": 64,
    "max_doublings": 0,
    "validation_grid": 2,
    "newton_iterations": 1,
    "shooting_iterations": 1,
}


@dataclass
class ToleranceConfig:
    """Numerical tolerances shared by every module."""

    root: float = 1e-12                  # energy-shell root residual
    legendre: float = 1e-12              # momentum -> velocity Newton
    shooting: float = 1e-12              # sub-arc endpoint mismatch
    residual: float = 1e-10              # discrete E-L residual at a critical configuration
    drift: float = 1e-8                  # energy drift of the full flow
    closure: float = 1e-5                # phase-space closure of a periodic orbit
    hyperbolicity_margin: float = 1e-4   # |lambda| >= 1 + margin is hyperbolic
    degeneracy_threshold: float = 1e-6   # lambda0 relative to lambda1
    global_tie: float = 1e-9             # co-global minima
    dedup: float = 1e-6                  # merge candidates closer than this
    uniqueness: float = 1e-8             # two sub-arc initialisations must agree
    refinement: float = 1e-6             # action change between m and 2m
    branch_consistency: float = 1e-6     # audit vs branch base point
    slope_margin: float = 1e-6           # distinct crossing slopes
    crossing_resolution: float = 1e-12   # energy resolution of crossing bisection
    fit: float = 0.05                    # corner exponent slack
    branch_floor: float = 1e-10          # minimal sigma * dH/dy2 along arcs


@dataclass
class DiscretizationConfig:
    """Broken-geodesic and integrator resolution."""

    m_initial: int = 32
    m_max: int = 128
    substeps: int = 16          # RK4 steps per sub-arc
    direct_nodes: int = 16      # interior nodes of the direct sub-arc method
    base_grid: int = 256        # multistart base points
    orbit_steps: int = 1024     # full-flow steps per period
    max_doublings: int = 6      # drift-driven step doublings
    validation_grid: int = 64   # SPD check grid per axis
    newton_iterations: int = 30
    shooting_iterations: int = 40


@dataclass
class ReductionConfig:
    """Energy-level reduction settings."""

    strip: tuple[float, float] = (-math.pi, 3 * math.pi)
    branch_orientation: int = 1
    y2_search_step: float = 0.5
    y2_search_doublings: int = 60


@dataclass
class SolverConfig:
    """Everything the numerical layers read."""

    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    discretization: DiscretizationConfig = field(default_factory=DiscretizationConfig)
    reduction: ReductionConfig = field(default_factory=ReductionConfig)


@dataclass
class ContinuationConfig:
    """Energy continuation and structure audit."""

    dE: float = 0.01
    dE_min: float = 1e-4
    audit_every: int = 10
    jump_tolerance: float = 0.1
    match_tolerance: float = 1e-3


@dataclass
class PerturbationConfig:
    """Monte-Carlo sweep settings."""

    seed: int = 0
    samples: int = 200
    min_samples: int = 100
    epsilon: float = 1e-2
    alpha: float = 0.05          # Wilson interval is (1 - alpha)


@dataclass
class RunConfig:
    """Root configuration for a CLI run."""

    model_path: str = ""
    energy: float | None = None
    energy_range: tuple[float, float] | None = None
    output_dir: str = "out"
    jobs: int = 0                # 0 -> all available cores
    log_level: str = "WARNING"
    monodromy: bool = True
    refine: bool = False

    solver: SolverConfig = field(default_factory=SolverConfig)
    continuation: ContinuationConfig = field(default_factory=ContinuationConfig)
    perturbation: PerturbationConfig = field(default_factory=PerturbationConfig)

    # Directory of the config file; relative paths resolve against it
    config_dir: Path = field(default_factory=Path.cwd)

    @property
    def model_file(self) -> Path:
        """Return the resolved model path."""
        path = Path(self.model_path)
        return path if path.is_absolute() else self.config_dir / path

    @property
    def output_path(self) -> Path:
        """Return the resolved output directory."""
        path = Path(self.output_dir)
        return path if path.is_absolute() else self.config_dir / path

    @property
    def workers(self) -> int:
        """Parallel degree with the 0 -> cpu count default applied."""
        return self.jobs if self.jobs > 0 else (os.cpu_count() or 1)

    def validate(self, command: str = "validate") -> None:
        """Check cross-field invariants for the given command.

        Raises:
            ConfigError: naming the offending field.
        """
        if not self.model_path:
            raise ConfigError("model_path is required", field="model")
        _check_positive(self.solver.tolerances)
        disc = self.solver.discretization
        if disc.m_initial < 3:
            raise ConfigError("m_initial must be at least 3", field="m_initial")
        if disc.m_max < disc.m_initial:
            raise ConfigError("m_max must be >= m_initial", field="m_max")
        if disc.substeps < 2 or disc.substeps % 2:
            raise ConfigError("substeps must be a positive even integer", field="substeps")
        for name, floor in _DISCRETIZATION_FLOORS.items():
            if getattr(disc, name) < floor:
                raise ConfigError(f"{name} must be at least {floor}", field=name)
        if self.jobs < 0:
            raise ConfigError("jobs must be non-negative", field="jobs")
        lo, hi = self.solver.reduction.strip
        if not lo < hi:
            raise ConfigError("strip must be an increasing interval", field="strip")
        if self.solver.reduction.branch_orientation not in (1, -1):
            raise ConfigError("branch_orientation must be +1 or -1", field="branch_orientation")
        red = self.solver.reduction
        if red.y2_search_step <= 0 or red.y2_search_doublings < 1:
            raise ConfigError("y2 search settings must be positive", field="y2_search_step")
        if self.log_level.upper() not in LOG_LEVELS:
            raise ConfigError(f"unknown log level {self.log_level!r}", field="log_level")

        if command == "solve" and self.energy is None:
            raise ConfigError("solve needs an energy", field="energy")
        if command in ("sweep", "perturb"):
            if self.energy_range is None:
                raise ConfigError(f"{command} needs energy_range", field="energy_range")
            e_a, e_d = self.energy_range
            if not e_a < e_d:
                raise ConfigError("energy_range must satisfy E_a < E_d", field="energy_range")
            cont = self.continuation
            if cont.dE <= 0 or cont.dE_min <= 0 or cont.dE_min > cont.dE:
                raise ConfigError("need 0 < dE_min <= dE", field="dE")
            if cont.audit_every < 1:
                raise ConfigError("audit_every must be positive", field="audit_every")
            if cont.jump_tolerance <= 0 or cont.match_tolerance <= 0:
                raise ConfigError(
                    "continuation tolerances must be positive", field="jump_tolerance"
                )
        if command == "perturb":
            pert = self.perturbation
            if pert.samples < max(1, pert.min_samples):
                raise ConfigError(
                    f"samples must be >= {max(1, pert.min_samples)}", field="samples"
                )
            if pert.epsilon <= 0:
                raise ConfigError("epsilon must be positive", field="epsilon")
            if not 0 < pert.alpha < 1:
                raise ConfigError("alpha must lie in (0, 1)", field="alpha")


def _check_positive(section: ToleranceConfig) -> None:
    for f in fields(section):
        if not getattr(section, f.name) > 0:
            raise ConfigError(f"tolerance {f.name} must be positive", field=f.name)


def _update_section(section: Any, data: dict, name: str) -> None:
    """Copy JSON values onto a dataclass section, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be an object", field=name)
    known = {f.name: f for f in fields(section)}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown key {name}.{key}", field=f"{name}.{key}")
        current = getattr(section, key)
        if isinstance(current, tuple):
            if not isinstance(value, list | tuple) or len(value) != len(current):
                raise ConfigError(f"{name}.{key} must be a pair", field=f"{name}.{key}")
            value = tuple(float(v) for v in value)
        elif isinstance(current, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"{name}.{key} must be a boolean", field=f"{name}.{key}")
        elif isinstance(current, int):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{name}.{key} must be an integer", field=f"{name}.{key}")
        elif isinstance(current, float):
            if isinstance(value, bool) or not isinstance(value, int | float):
                raise ConfigError(f"{name}.{key} must be a number", field=f"{name}.{key}")
            value = float(value)
        setattr(section, key, value)


def _load_env_overrides(config: RunConfig) -> None:
    """Override config values from environment variables."""
    if level := os.getenv("ORBITS_LOG"):
        config.log_level = level.upper()
    if jobs := os.getenv("ORBITS_JOBS"):
        try:
            config.jobs = int(jobs)
        except ValueError as e:
            raise ConfigError(f"ORBITS_JOBS must be an integer, got {jobs!r}") from e


def _dict_to_config(data: dict) -> RunConfig:
    """Convert a JSON dict to a RunConfig."""
    config = RunConfig()
    top = {
        "model", "energy", "energy_range", "output", "jobs", "log_level", "monodromy",
        "refine", "tolerances", "discretization", "reduction", "continuation", "perturbation",
    }
    if unknown := sorted(set(data) - top):
        raise ConfigError(f"unknown keys: {', '.join(unknown)}", field=unknown[0])

    config.model_path = str(data.get("model", config.model_path))
    if (energy := data.get("energy")) is not None:
        if isinstance(energy, bool) or not isinstance(energy, int | float):
            raise ConfigError("energy must be a number", field="energy")
        config.energy = float(energy)
    if (energy_range := data.get("energy_range")) is not None:
        if not isinstance(energy_range, list) or len(energy_range) != 2:
            raise ConfigError("energy_range must be [E_a, E_d]", field="energy_range")
        try:
            config.energy_range = (float(energy_range[0]), float(energy_range[1]))
        except (TypeError, ValueError) as e:
            raise ConfigError("energy_range entries must be numbers", field="energy_range") from e
    config.output_dir = str(data.get("output", config.output_dir))
    jobs = data.get("jobs", config.jobs)
    if isinstance(jobs, bool) or not isinstance(jobs, int) or jobs < 0:
        raise ConfigError("jobs must be a non-negative integer", field="jobs")
    config.jobs = jobs
    level = data.get("log_level", config.log_level)
    if not isinstance(level, str):
        raise ConfigError("log_level must be a string", field="log_level")
    config.log_level = level.upper()
    for name in ("monodromy", "refine"):
        if (flag := data.get(name)) is not None:
            if not isinstance(flag, bool):
                raise ConfigError(f"{name} must be a boolean", field=name)
            setattr(config, name, flag)

    # Solver sections
    for name in ("tolerances", "discretization", "reduction"):
        if (section := data.get(name)) is not None:
            _update_section(getattr(config.solver, name), section, name)

    # Workflow sections
    for name in ("continuation", "perturbation"):
        if (section := data.get(name)) is not None:
            _update_section(getattr(config, name), section, name)

    return config


def _section_to_dict(section: Any) -> dict:
    return {
        f.name: list(v) if isinstance(v := getattr(section, f.name), tuple) else v
        for f in fields(section)
    }


def _config_to_dict(config: RunConfig) -> dict:
    """Convert a RunConfig to a JSON-serializable dict."""
    data: dict[str, Any] = {
        "model": config.model_path,
        "output": config.output_dir,
        "jobs": config.jobs,
        "log_level": config.log_level,
        "monodromy": config.monodromy,
        "refine": config.refine,
        "tolerances": _section_to_dict(config.solver.tolerances),
        "discretization": _section_to_dict(config.solver.discretization),
        "reduction": _section_to_dict(config.solver.reduction),
        "continuation": _section_to_dict(config.continuation),
        "perturbation": _section_to_dict(config.perturbation),
    }
    if config.energy is not None:
        data["energy"] = config.energy
    if config.energy_range is not None:
        data["energy_range"] = list(config.energy_range)
    return data


def load_config(config_path: Path) -> RunConfig:
    """Load a run configuration from file, env vars, and defaults.

    Raises:
        OSError: the file cannot be read.
        ConfigError: the file is not valid JSON or has malformed fields.
    """
    load_dotenv()
    with open(config_path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON in {config_path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")

    config = _dict_to_config(data)
    config.config_dir = Path(config_path).resolve().parent

    # Apply env overrides
    _load_env_overrides(config)
    return config


def save_config(config: RunConfig, config_path: Path) -> None:
    """Save configuration to JSON file."""
    config_path.parent.mkdir(parents=True, exist_ok=True)
    with open(config_path, "w") as f:
        json.dump(_config_to_dict(config), f, indent=2)
