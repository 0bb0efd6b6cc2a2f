"""Tests for the broken-geodesic action: sub-arcs, configurations, Jacobi matrix, twist maps."""

from __future__ import annotations

import numpy as np
import pytest

from orbits.discrete.configuration import Configuration, el_residual, evaluate, total_action
from orbits.discrete.jacobi import assemble_jacobi, is_positive_definite
from orbits.discrete.refinement import arcs_unique, refine_configuration
from orbits.discrete.subarc import subarc_action, unique_subarc
from orbits.discrete.twist import period_map, twist_jacobian, twist_map
from orbits.errors import NotCritical
from orbits.reduction.system import ReducedSystem

from .conftest import RIDGE_ENERGY

TWO_PI = 2.0 * np.pi
M = 16


def _free_action(dx: float, m: int) -> float:
    return float(np.sqrt(2 * RIDGE_ENERGY) * np.hypot(TWO_PI / m, dx))


def _bumped(m: int, amplitude: float = 0.05) -> np.ndarray:
    return amplitude * np.sin(TWO_PI * np.arange(m) / m + 0.3)


# ─── Sub-arcs ────────────────────────────────────────────────────

class TestSubArc:
    def test_free_value_and_twist(self, flat_rs):
        arc = subarc_action(flat_rs, 2, 0.1, 0.25, M)
        assert arc.value == pytest.approx(_free_action(0.15, M), rel=1e-10)
        assert arc.d_xxp < 0
        assert arc.twist

    def test_generating_function_momenta(self, flat_rs):
        arc = subarc_action(flat_rs, 0, 0.1, 0.25, M)
        s = 0.15 / (TWO_PI / M)
        y = np.sqrt(2 * RIDGE_ENERGY) * s / np.hypot(1.0, s)
        assert -arc.d_x == pytest.approx(y, rel=1e-8)
        assert arc.d_xp == pytest.approx(y, rel=1e-8)

    def test_derivatives_match_finite_differences(self, ridge_rs):
        x, xp, step = 0.2, 0.35, 1e-5
        arc = subarc_action(ridge_rs, 3, x, xp, M)
        plus = subarc_action(ridge_rs, 3, x + step, xp, M)
        minus = subarc_action(ridge_rs, 3, x - step, xp, M)
        assert arc.d_x == pytest.approx((plus.value - minus.value) / (2 * step), rel=1e-5)
        assert arc.d_xx == pytest.approx((plus.d_x - minus.d_x) / (2 * step), rel=1e-5)
        plus_p = subarc_action(ridge_rs, 3, x, xp + step, M)
        minus_p = subarc_action(ridge_rs, 3, x, xp - step, M)
        assert arc.d_xxp == pytest.approx((plus_p.d_x - minus_p.d_x) / (2 * step), rel=1e-5)
        assert arc.d_xpxp == pytest.approx((plus_p.d_xp - minus_p.d_xp) / (2 * step), rel=1e-5)

    def test_unique(self, ridge_rs):
        unique, gap = unique_subarc(ridge_rs, 1, 0.0, 0.1, M)
        assert unique
        assert gap < 1e-8

    def test_index_checked(self, ridge_rs):
        with pytest.raises(ValueError):
            subarc_action(ridge_rs, M, 0.0, 0.0, M)


# ─── Twist maps ──────────────────────────────────────────────────

class TestTwistMap:
    def test_area_preserving(self, two_ridge_model, solver_config):
        rs = ReducedSystem(model=two_ridge_model, energy=0.5, config=solver_config)
        assert np.linalg.det(twist_jacobian(rs, 3, 0.4, 0.1, M)) == pytest.approx(1.0, abs=1e-7)

    def test_monotone_twist(self, ridge_rs):
        step = 1e-6
        up = twist_map(ridge_rs, 0, 0.3, 0.1 + step, M)[0]
        down = twist_map(ridge_rs, 0, 0.3, 0.1 - step, M)[0]
        assert up > down

    def test_minimal_orbit_is_fixed(self, ridge_rs):
        x, y = period_map(ridge_rs, 0.0, 0.0, M)
        assert abs(x) < 1e-6
        assert abs(y) < 1e-6


# ─── Configurations ──────────────────────────────────────────────

class TestConfiguration:
    def test_needs_three_nodes(self):
        with pytest.raises(ValueError):
            Configuration(points=np.zeros(2), energy=1.0)

    def test_free_equally_spaced(self, flat_rs):
        cfg = Configuration(points=TWO_PI * np.arange(M) / M, energy=RIDGE_ENERGY, lift=1)
        assert total_action(cfg, flat_rs) == pytest.approx(M * _free_action(TWO_PI / M, M))
        assert np.max(np.abs(el_residual(cfg, flat_rs))) < 1e-10

    def test_ridge_constant_is_critical(self, ridge_rs):
        cfg = Configuration.constant(0.0, M, RIDGE_ENERGY)
        assert np.max(np.abs(el_residual(cfg, ridge_rs))) < 1e-9

    def test_residual_is_gradient(self, ridge_rs):
        cfg = Configuration(points=_bumped(M), energy=RIDGE_ENERGY)
        residual = el_residual(cfg, ridge_rs)
        step = 1e-5
        for i in (0, 5, 11):
            e = np.zeros(M)
            e[i] = step
            plus = total_action(cfg.with_points(cfg.points + e), ridge_rs)
            minus = total_action(cfg.with_points(cfg.points - e), ridge_rs)
            assert residual[i] == pytest.approx((plus - minus) / (2 * step), rel=1e-5, abs=1e-9)

    def test_constant_shift_of_potential(self, ridge_model, solver_config):
        cfg = Configuration(points=_bumped(M), energy=RIDGE_ENERGY)
        base = ReducedSystem(model=ridge_model, energy=RIDGE_ENERGY, config=solver_config)
        shifted = ReducedSystem(
            model=ridge_model.shifted(0.5), energy=RIDGE_ENERGY + 0.5, config=solver_config
        )
        lifted = cfg.at_energy(RIDGE_ENERGY + 0.5)
        assert total_action(lifted, shifted) == pytest.approx(total_action(cfg, base), rel=1e-12)

    def test_rejects_other_energy_level(self, ridge_rs):
        cfg = Configuration.constant(0.0, M, RIDGE_ENERGY + 0.1)
        with pytest.raises(ValueError):
            total_action(cfg, ridge_rs)


# ─── Jacobi matrix ───────────────────────────────────────────────

class TestJacobi:
    def test_free_zero_mode(self, flat_rs):
        cfg = Configuration.constant(1.0, M, RIDGE_ENERGY)
        jacobi = assemble_jacobi(cfg, flat_rs)
        assert jacobi.lambda0 == pytest.approx(0.0, abs=1e-8)
        assert jacobi.lambda1 > 0
        assert np.allclose(jacobi.ground_vector, 1.0, atol=1e-6)

    def test_ridge_minimum(self, ridge_rs):
        cfg = Configuration.constant(0.0, M, RIDGE_ENERGY)
        jacobi = assemble_jacobi(cfg, ridge_rs)
        assert jacobi.lambda0 > 0
        assert jacobi.lambda1 - jacobi.lambda0 > 0
        assert jacobi.twist
        assert jacobi.ground_positive()
        assert jacobi.positive_definite
        assert jacobi.interior_positive_definite
        assert jacobi.eigen_residual() < 1e-10

    def test_schur_complement_sign(self, ridge_rs):
        cfg = Configuration.constant(0.0, M, RIDGE_ENERGY)
        assert assemble_jacobi(cfg, ridge_rs).schur_complement() > 0

    def test_not_critical(self, ridge_rs):
        cfg = Configuration(points=_bumped(M), energy=RIDGE_ENERGY)
        with pytest.raises(NotCritical):
            assemble_jacobi(cfg, ridge_rs)
        exploratory = assemble_jacobi(cfg, ridge_rs, exploratory=True)
        assert is_positive_definite(exploratory.interior())

    def test_dense_matches_evaluation(self, ridge_rs):
        cfg = Configuration(points=_bumped(M), energy=RIDGE_ENERGY)
        jacobi = assemble_jacobi(cfg, ridge_rs, exploratory=True)
        assert np.allclose(jacobi.dense(), evaluate(cfg, ridge_rs).jacobi_dense()[0])


# ─── Refinement ──────────────────────────────────────────────────

class TestRefinement:
    def test_interleaves_nodes(self, ridge_rs):
        cfg = Configuration(points=_bumped(M, 0.02), energy=RIDGE_ENERGY)
        refined = refine_configuration(cfg, ridge_rs)
        assert refined.m == 2 * M
        assert np.array_equal(refined.points[0::2], cfg.points)

    def test_critical_action_preserved(self, ridge_rs):
        cfg = Configuration.constant(0.0, M, RIDGE_ENERGY)
        refined = refine_configuration(cfg, ridge_rs)
        assert total_action(refined, ridge_rs) == pytest.approx(
            total_action(cfg, ridge_rs), abs=1e-6
        )
        assert np.max(np.abs(el_residual(refined, ridge_rs))) < 1e-9

    def test_arcs_unique(self, ridge_rs):
        unique, gap = arcs_unique(Configuration.constant(0.0, M, RIDGE_ENERGY), ridge_rs)
        assert unique
        assert gap <= ridge_rs.tolerances.uniqueness
