"""Tests for energy continuation, audits and crossing detection."""

from __future__ import annotations

import numpy as np
import pytest

from orbits.classifier.minima import canonical_angle, find_minima
from orbits.config import ContinuationConfig
from orbits.continuation.branch import _energy_grid, continue_branch
from orbits.continuation.structure import global_structure
from orbits.errors import DegenerateSeed
from orbits.model.benchmarks import two_ridge_exchange_energy
from orbits.reduction.system import ReducedFamily

from .conftest import RIDGE_ENERGY, RIDGE_EPS

TWO_PI = 2.0 * np.pi


def _ridge_action(energy: float) -> float:
    return TWO_PI * np.sqrt(2 * (energy - RIDGE_EPS))


def _distance(a: float, b: float) -> float:
    d = abs(canonical_angle(a) - canonical_angle(b))
    return min(d, TWO_PI - d)


# ─── Energy grid ─────────────────────────────────────────────────

class TestEnergyGrid:
    def test_includes_both_ends(self):
        grid = _energy_grid(0.26, 0.36, 0.025)
        assert grid[0] == 0.26
        assert grid[-1] == pytest.approx(0.36)
        assert grid.size == 5

    def test_appends_partial_step(self):
        grid = _energy_grid(0.0, 1.0, 0.3)
        assert grid[-1] == 1.0
        assert np.allclose(np.diff(grid[:-1]), 0.3)


# ─── Branch continuation ─────────────────────────────────────────

class TestContinueBranch:
    def test_ridge_branch_stays_on_ridge(self, ridge_rs, ridge_family, continuation_settings):
        seed = find_minima(ridge_rs, with_monodromy=False)[0]
        branch = continue_branch(ridge_family, seed, (0.8, 1.2), 0.1, continuation_settings)
        assert branch.energies == pytest.approx([0.8, 0.9, 1.0, 1.1, 1.2])
        assert all(_distance(x, 0.0) < 1e-8 for x in branch.base_points)
        assert np.all(branch.lambda0s > 0)
        assert branch.end_reasons == {"lower": "range_end", "upper": "range_end"}

    def test_actions_match_cold_solves(self, ridge_rs, ridge_family, continuation_settings):
        seed = find_minima(ridge_rs, with_monodromy=False)[0]
        branch = continue_branch(ridge_family, seed, (0.8, 1.2), 0.1, continuation_settings)
        for point in branch.points:
            assert point.action == pytest.approx(_ridge_action(point.energy), abs=1e-8)

    def test_period_is_action_slope(self, ridge_rs, ridge_family, continuation_settings):
        seed = find_minima(ridge_rs, with_monodromy=False)[0]
        branch = continue_branch(ridge_family, seed, (0.8, 1.2), 0.1, continuation_settings)
        h = 1e-4
        slope = (_ridge_action(1.1 + h) - _ridge_action(1.1 - h)) / (2 * h)
        assert branch.point_at(1.1).period == pytest.approx(slope, rel=1e-6)
        assert branch.action_at(1.05) == pytest.approx(_ridge_action(1.05), abs=1e-6)

    def test_degenerate_seed_rejected(self, flat_rs, flat_model, solver_config):
        seed = find_minima(flat_rs, with_monodromy=False)[0]
        family = ReducedFamily(model=flat_model, config=solver_config)
        with pytest.raises(DegenerateSeed):
            continue_branch(family, seed, (0.8, 1.2), 0.1)

    def test_serialises(self, ridge_rs, ridge_family, continuation_settings):
        seed = find_minima(ridge_rs, with_monodromy=False)[0]
        branch = continue_branch(ridge_family, seed, (1.0, 1.2), 0.1, continuation_settings)
        data = branch.to_dict()
        assert data["id"] == "B0"
        assert len(data["energies"]) == len(data["actions"]) == 3


# ─── Global structure ────────────────────────────────────────────

class TestGlobalStructure:
    def test_single_ridge_no_crossings(self, ridge_family, continuation_settings):
        report = global_structure(
            ridge_family, (0.8, 1.2), 0.1, continuation_settings, with_monodromy=False
        )
        assert report.crossings == []
        assert len(report.branches) == 1
        assert [row.n_global for row in report.summary] == [1] * 5
        assert all(row.lambda0 > 0 for row in report.summary)
        assert report.min_margin > 0
        assert all(entry["branch"] == "B0" for entry in report.audits)
        tol = ridge_family.config.tolerances.branch_consistency
        assert tol == 1e-6
        assert all(entry["deviation"] <= tol for entry in report.audits)

    def test_free_model_has_no_branch(self, flat_model, solver_config, continuation_settings):
        family = ReducedFamily(model=flat_model, config=solver_config)
        report = global_structure(
            family, (0.8, 1.0), 0.1, continuation_settings, with_monodromy=False
        )
        assert report.branches == []
        assert any(flag.startswith("degenerate_global_minimum") for flag in report.flags)
        assert report.min_margin == 0.0

    def test_symmetric_tie_flagged(self, double_ridge_model, solver_config):
        family = ReducedFamily(model=double_ridge_model, config=solver_config)
        settings = ContinuationConfig(dE=0.1, dE_min=0.0125, audit_every=2)
        report = global_structure(family, (0.9, 1.1), 0.1, settings, with_monodromy=False)
        assert report.crossings == []
        assert "symmetric_tie:B0/B1" in report.flags
        assert all(row.n_global == 2 for row in report.summary)

    @pytest.mark.slow
    def test_two_ridge_single_crossing(self, two_ridge_model, solver_config):
        family = ReducedFamily(model=two_ridge_model, config=solver_config)
        settings = ContinuationConfig(dE=0.025, dE_min=0.003125, audit_every=2)
        report = global_structure(family, (0.26, 0.36), 0.025, settings)
        assert len(report.crossings) == 1
        event = report.crossings[0]
        assert event.E_star == pytest.approx(two_ridge_exchange_energy(), abs=1e-8)
        assert event.hyperbolic
        assert abs(event.gap_derivative) > 1e-6
        assert "equal_slopes" not in event.flags
        assert {round(_distance(event.x_a, 0.0), 6), round(_distance(event.x_b, 0.0), 6)} == {
            0.0,
            round(np.pi, 6),
        }
        crossing_rows = [row for row in report.summary if row.crossing]
        assert len(crossing_rows) == 1
        assert crossing_rows[0].n_global == 2

    @pytest.mark.slow
    def test_crossing_on_grid_energy(self, two_ridge_model, solver_config):
        family = ReducedFamily(model=two_ridge_model, config=solver_config)
        settings = ContinuationConfig(dE=0.05, dE_min=0.003125, audit_every=2)
        report = global_structure(family, (0.2, 0.4), 0.05, settings, with_monodromy=False)
        assert len(report.crossings) == 1
        assert report.crossings[0].E_star == pytest.approx(two_ridge_exchange_energy(), abs=1e-8)
        assert not any(flag.startswith("symmetric_tie") for flag in report.flags)
        near = [row for row in report.summary if abs(row.E - 0.3) < 1e-6]
        assert len(near) == 1
        assert near[0].crossing
        assert near[0].n_global == 2
        deviations = [e["deviation"] for e in report.audits if e["deviation"] is not None]
        assert deviations
        assert max(deviations) <= 1e-6

    def test_summary_columns(self, ridge_family, continuation_settings):
        report = global_structure(
            ridge_family, (RIDGE_ENERGY, RIDGE_ENERGY + 0.1), 0.1, continuation_settings,
            with_monodromy=False,
        )
        row = report.summary[0].to_row()
        assert list(row) == ["E", "n_global_minima", "min_action", "lambda0", "multiplier_modulus"]
