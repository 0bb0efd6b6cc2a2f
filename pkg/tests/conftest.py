"""Shared fixtures: benchmark models and cheap solver settings."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from orbits.config import ContinuationConfig, DiscretizationConfig, SolverConfig
from orbits.model.benchmarks import get_benchmark
from orbits.model.spec import ModelSpec
from orbits.reduction.system import ReducedFamily, ReducedSystem

RIDGE_EPS = 0.1
RIDGE_ENERGY = 1.0


@pytest.fixture
def solver_config() -> SolverConfig:
    return SolverConfig(
        discretization=DiscretizationConfig(
            m_initial=16,
            m_max=32,
            substeps=16,
            direct_nodes=12,
            base_grid=24,
            orbit_steps=512,
            validation_grid=24,
        )
    )


@pytest.fixture
def flat_model() -> ModelSpec:
    return get_benchmark("flat")


@pytest.fixture
def ridge_model() -> ModelSpec:
    return get_benchmark("ridge", eps0=RIDGE_EPS)


@pytest.fixture
def double_ridge_model() -> ModelSpec:
    return get_benchmark("double_ridge", eps0=RIDGE_EPS)


@pytest.fixture
def two_ridge_model() -> ModelSpec:
    return get_benchmark("two_ridge")


@pytest.fixture
def flat_rs(flat_model, solver_config) -> ReducedSystem:
    return ReducedSystem(model=flat_model, energy=RIDGE_ENERGY, config=solver_config)


@pytest.fixture
def ridge_rs(ridge_model, solver_config) -> ReducedSystem:
    return ReducedSystem(model=ridge_model, energy=RIDGE_ENERGY, config=solver_config)


@pytest.fixture
def ridge_family(ridge_model, solver_config) -> ReducedFamily:
    return ReducedFamily(model=ridge_model, config=solver_config)


@pytest.fixture
def continuation_settings() -> ContinuationConfig:
    return ContinuationConfig(dE=0.1, dE_min=0.0125, audit_every=2)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def write_run(tmp_path: Path):
    """Write a model file and a run config next to it; return the config path."""

    def _write(model: ModelSpec | dict, **run: object) -> Path:
        model_path = tmp_path / "model.json"
        document = model if isinstance(model, dict) else model.to_document()
        model_path.write_text(json.dumps(document))
        config = {
            "model": "model.json",
            "output": "out",
            "jobs": 1,
            "monodromy": True,
            "discretization": {
                "m_initial": 16,
                "m_max": 32,
                "substeps": 16,
                "direct_nodes": 12,
                "base_grid": 24,
                "orbit_steps": 512,
                "validation_grid": 24,
            },
        }
        config.update(run)
        config_path = tmp_path / "run.json"
        config_path.write_text(json.dumps(config))
        return config_path

    return _write
