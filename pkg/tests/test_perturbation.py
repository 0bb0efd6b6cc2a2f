"""Tests for the perturbation lab: kernel, first-order check, Fourier response, Monte-Carlo."""

from __future__ import annotations

import numpy as np
import pytest

from orbits.classifier.profile import ActionProfile, action_of_base, action_profile
from orbits.config import ContinuationConfig
from orbits.perturbation.kernel import (
    FourierPerturbation,
    first_order_check,
    fourier_mode,
    fourier_response,
    kernel_K,
    kernel_sample,
    perturbed_system,
)
from orbits.perturbation.montecarlo import monte_carlo_nondegeneracy, wilson_interval
from orbits.perturbation.oscillation import osc_criterion, oscillation, quartic_constant

from .conftest import RIDGE_ENERGY, RIDGE_EPS

TWO_PI = 2.0 * np.pi
# Period of the ridge orbit; the kernel of a constant is -T along it
RIDGE_PERIOD = TWO_PI / np.sqrt(2 * (RIDGE_ENERGY - RIDGE_EPS))


def _zero(points):
    return np.zeros(len(points))


def _one(points):
    return np.ones(len(points))


def _cos1(points):
    return np.cos(points[:, 0])


def _synthetic_profile(values) -> ActionProfile:
    grid = TWO_PI * np.arange(len(values)) / len(values)
    return ActionProfile(E=RIDGE_ENERGY, base_points=grid, values=np.asarray(values, float))


# ─── Kernel ──────────────────────────────────────────────────────

class TestKernel:
    def test_zero_potential(self, ridge_rs):
        assert kernel_K(ridge_rs, 0.0, _zero) == 0.0

    def test_constant_is_minus_period(self, ridge_rs):
        assert kernel_K(ridge_rs, 0.0, _one) == pytest.approx(-RIDGE_PERIOD, rel=1e-10)

    def test_cos_mode_on_ridge(self, ridge_rs):
        assert kernel_K(ridge_rs, 0.0, fourier_mode(1)) == pytest.approx(-RIDGE_PERIOD, rel=1e-10)

    def test_linear_in_potential(self, ridge_rs):
        a = kernel_K(ridge_rs, 0.2, _cos1)
        b = kernel_K(ridge_rs, 0.2, fourier_mode(2, "sin"))
        combined = kernel_K(
            ridge_rs, 0.2, lambda p: 2.0 * _cos1(p) - 3.0 * np.sin(2 * p[:, 0])
        )
        assert combined == pytest.approx(2.0 * a - 3.0 * b, rel=1e-10, abs=1e-12)

    def test_custom_weight(self, ridge_rs):
        sample = kernel_sample(ridge_rs, 0.0, _one, weight=lambda taus, states: np.ones_like(taus))
        assert sample.value == pytest.approx(TWO_PI, rel=1e-12)
        assert sample.quadrature_error < 1e-10

    def test_matches_action_derivative(self, ridge_rs):
        P = fourier_mode(1, "sin")
        step = 1e-4
        plus = perturbed_system(ridge_rs, P, step)
        minus = perturbed_system(ridge_rs, P, -step)
        slope = (action_of_base(plus, 0.3) - action_of_base(minus, 0.3)) / (2 * step)
        assert kernel_K(ridge_rs, 0.3, P) == pytest.approx(slope, rel=1e-4)


# ─── First-order check ───────────────────────────────────────────

class TestFirstOrder:
    def test_quadratic_remainder(self, ridge_rs):
        P = fourier_mode(1)
        report = first_order_check(
            lambda eps: perturbed_system(ridge_rs, P, eps), 0.0, P, [0.0, 1e-2, 5e-3, 2.5e-3]
        )
        assert report.residuals[0] == 0.0
        assert report.kernel == pytest.approx(-RIDGE_PERIOD, rel=1e-10)
        assert report.fitted_order >= 1.9
        assert abs(report.residuals[-1]) < abs(report.residuals[1])

    def test_serialises(self, ridge_rs):
        P = fourier_mode(1)
        report = first_order_check(lambda eps: perturbed_system(ridge_rs, P, eps), 0.0, P, [0.0])
        data = report.to_dict()
        assert data["eps"] == [0.0]
        assert data["residuals"] == [0.0]


# ─── Fourier response ────────────────────────────────────────────

class TestFourierResponse:
    def test_zero_weight(self, ridge_rs):
        u, v = fourier_response(
            ridge_rs, [0.0, 0.5], 1, weight=lambda taus, states: np.zeros_like(taus)
        )
        assert np.all(u == 0.0)
        assert np.all(v == 0.0)

    def test_ridge_top(self, ridge_rs):
        u, v = fourier_response(ridge_rs, [0.0], 1)
        assert u[0] == pytest.approx(-RIDGE_PERIOD, rel=1e-10)
        assert v[0] == pytest.approx(0.0, abs=1e-10)

    def test_reconstructs_kernel(self, ridge_rs):
        x, ell = 0.4, 2
        u, v = fourier_response(ridge_rs, [x], ell)
        k_c = kernel_K(ridge_rs, x, fourier_mode(ell, "cos"))
        k_s = kernel_K(ridge_rs, x, fourier_mode(ell, "sin"))
        assert k_c == pytest.approx(u[0] * np.cos(ell * x) - v[0] * np.sin(ell * x), abs=1e-10)
        assert k_s == pytest.approx(u[0] * np.sin(ell * x) + v[0] * np.cos(ell * x), abs=1e-10)

    def test_rejects_high_modes(self, ridge_rs):
        with pytest.raises(ValueError):
            fourier_response(ridge_rs, [0.0], 3)


# ─── Oscillation test ────────────────────────────────────────────

class TestOscillation:
    def test_window_oscillation(self):
        grid = TWO_PI * np.arange(64) / 64
        profile = _synthetic_profile(np.cos(grid))
        assert oscillation(profile, (0.0, np.pi)) == pytest.approx(2.0)

    def test_quartic_constant_of_cosine(self):
        grid = TWO_PI * np.arange(256) / 256
        profile = _synthetic_profile(np.cos(grid))
        assert quartic_constant(profile) == pytest.approx(1.0 / 12.0, rel=1e-3)

    def test_cosine_profile_holds(self):
        grid = TWO_PI * np.arange(64) / 64
        assert osc_criterion(_synthetic_profile(np.cos(grid)), (0.0, 1.0))

    def test_flat_profile_fails(self, flat_rs):
        profile = action_profile(flat_rs, base_points=TWO_PI * np.arange(8) / 8)
        assert not osc_criterion(profile, (0.0, 1.0))

    def test_ridge_profile_holds(self, ridge_rs):
        assert osc_criterion(action_profile(ridge_rs), (0.0, np.pi), M=0.0)

    def test_interval_checked(self):
        with pytest.raises(ValueError):
            osc_criterion(_synthetic_profile(np.zeros(8)), (1.0, 0.5))


# ─── Monte-Carlo ─────────────────────────────────────────────────

class TestWilson:
    def test_contains_point_estimate(self):
        lo, hi = wilson_interval(80, 100)
        assert lo < 0.8 < hi
        assert lo == pytest.approx(0.7112, abs=1e-3)
        assert hi == pytest.approx(0.8666, abs=1e-3)

    def test_all_pass_stays_in_unit_interval(self):
        lo, hi = wilson_interval(50, 50)
        assert 0.9 < lo < 1.0
        assert hi == pytest.approx(1.0)

    def test_empty(self):
        assert wilson_interval(0, 0) == (0.0, 1.0)


class TestFourierPerturbation:
    def test_range_checked(self):
        with pytest.raises(ValueError):
            FourierPerturbation(0.5, 1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            FourierPerturbation(1.0, 1.0, 1.0, 1.0, epsilon=0.0)

    def test_sample_in_box(self, rng):
        for _ in range(20):
            p = FourierPerturbation.sample(rng, 1e-2)
            assert all(1.0 <= a <= 2.0 for a in p.parameters)

    def test_as_potential(self):
        p = FourierPerturbation(1.0, 2.0, 1.5, 1.25)
        x = np.array([[0.3, 2.0]])
        expected = np.cos(0.3) + 2.0 * np.sin(0.3) + 1.5 * np.cos(0.6) + 1.25 * np.sin(0.6)
        assert p.as_potential(x)[0] == pytest.approx(expected)


class TestMonteCarlo:
    def _run(self, ridge_model, solver_config, seed):
        return monte_carlo_nondegeneracy(
            ridge_model,
            epsilon=1e-2,
            n_samples=2,
            E_range=(0.9, 1.0),
            seed=seed,
            config=solver_config,
            settings=ContinuationConfig(dE=0.1, dE_min=0.0125, audit_every=2),
            min_samples=1,
        )

    def test_deterministic_for_seed(self, ridge_model, solver_config):
        a = self._run(ridge_model, solver_config, 7)
        b = self._run(ridge_model, solver_config, 7)
        assert a.to_dict() == b.to_dict()
        assert a.n_samples == 2
        assert 0.0 <= a.ci[0] <= a.fraction <= a.ci[1] <= 1.0

    def test_fraction_reevaluates(self, ridge_model, solver_config):
        report = self._run(ridge_model, solver_config, 3)
        assert report.fraction_at(-np.inf) == pytest.approx(
            sum(o.error is None for o in report.outcomes) / 2
        )
        assert report.fraction_at(np.inf) == 0.0

    def test_rejects_small_sample(self, ridge_model):
        with pytest.raises(ValueError):
            monte_carlo_nondegeneracy(ridge_model, 1e-2, 10, (0.9, 1.0), seed=0)

    def test_flat_base_threshold_sweep(self, flat_model, solver_config):
        report = monte_carlo_nondegeneracy(
            flat_model,
            epsilon=1e-2,
            n_samples=3,
            E_range=(0.9, 1.0),
            seed=5,
            config=solver_config,
            settings=ContinuationConfig(dE=0.1, dE_min=0.0125, audit_every=2),
            min_samples=1,
        )
        assert report.n_samples == 3
        fractions = [report.fraction_at(t) for t in (0.0, 1e-6, 1e-3, 1e-1)]
        assert all(a >= b for a, b in zip(fractions, fractions[1:]))
        assert report.fraction == fractions[1]
