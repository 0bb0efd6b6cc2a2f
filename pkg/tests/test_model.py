"""Tests for the model core: Fourier tables, model files, Legendre map, flow, monodromy."""

from __future__ import annotations

import json

import numpy as np
import pytest

from orbits.errors import ModelValidationError, NotClosed
from orbits.model.benchmarks import (
    get_benchmark,
    list_benchmarks,
    two_ridge_exchange_energy,
)
from orbits.model.dynamics import (
    evaluate_lagrangian,
    hamiltonian,
    integrate_el,
    legendre,
    velocity_from_momentum,
)
from orbits.model.fourier import FourierTable
from orbits.model.monodromy import FloquetVerdict, deflate, monodromy
from orbits.model.spec import ModelSpec

from .conftest import RIDGE_ENERGY, RIDGE_EPS

TWO_PI = 2.0 * np.pi


# ─── Fourier tables ──────────────────────────────────────────────

class TestFourierTable:
    def test_cos_and_sin_terms(self):
        table = FourierTable.from_rows([[1, 0, 2.0, 0.0], [0, 1, 0.0, 3.0]])
        x = np.array([[0.3, 0.7]])
        expected = 2.0 * np.cos(0.3) + 3.0 * np.sin(0.7)
        assert table(x)[0] == pytest.approx(expected, rel=1e-14)

    def test_cutoff(self):
        assert FourierTable.from_rows([[2, -3, 1.0, 0.0]]).cutoff == 3
        assert FourierTable.zero().cutoff == 0

    def test_add_and_scale(self):
        a = FourierTable.from_rows([[1, 0, 1.0, 0.0]])
        b = FourierTable.constant(0.5)
        x = np.array([[1.1, 0.0]])
        assert (a + b.scaled(2.0))(x)[0] == pytest.approx(np.cos(1.1) + 1.0)

    def test_rows_roundtrip(self):
        rows = [[1, 2, 0.25, -0.5]]
        assert FourierTable.from_rows(rows).to_rows() == rows


# ─── Model spec ──────────────────────────────────────────────────

class TestModelSpec:
    def test_lagrangian_at_rest(self, ridge_model):
        x = np.array([[0.4, 1.3], [2.0, 5.0]])
        L = evaluate_lagrangian(ridge_model, x, np.zeros_like(x))
        assert np.allclose(L, -RIDGE_EPS * np.cos(x[:, 0]))

    def test_lagrangian_unit_velocity(self, ridge_model):
        L = evaluate_lagrangian(ridge_model, [0.0, 0.0], [0.0, 1.0])
        assert float(L) == pytest.approx(0.5 - RIDGE_EPS)

    def test_validate_identity(self, ridge_model):
        report = ridge_model.validate(grid=16)
        assert report.m_L == pytest.approx(1.0)
        assert report.potential_range == pytest.approx((-RIDGE_EPS, RIDGE_EPS))

    def test_validate_indefinite_names_point(self):
        model = ModelSpec.from_document(
            {"kinetic": {"a11": [[0, 0, 1.0, 0.0], [1, 0, 2.0, 0.0]]}}
        )
        with pytest.raises(ModelValidationError) as info:
            model.validate(grid=16)
        assert info.value.details["eigenvalue"] < 0
        assert info.value.details["point"][0] == pytest.approx(np.pi)

    def test_document_rejects_mode_above_cutoff(self):
        with pytest.raises(ModelValidationError):
            ModelSpec.from_document({"potential": [[3, 0, 1.0, 0.0]], "cutoff": 2})

    def test_document_rejects_unknown_key(self):
        with pytest.raises(ModelValidationError):
            ModelSpec.from_document({"potentail": []})

    def test_dump_and_load(self, tmp_path, two_ridge_model):
        path = tmp_path / "model.json"
        two_ridge_model.dump(path)
        loaded = ModelSpec.load(path)
        assert loaded.to_document() == two_ridge_model.to_document()

    def test_load_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ModelValidationError):
            ModelSpec.load(path)

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            ModelSpec.load(tmp_path / "missing.json")

    def test_with_perturbation_and_shift(self, ridge_model):
        P = FourierTable.from_rows([[2, 0, 1.0, 0.0]])
        model = ridge_model.with_perturbation(P, 0.01).shifted(0.5)
        x = np.array([0.3, 0.0])
        expected = RIDGE_EPS * np.cos(0.3) + 0.01 * np.cos(0.6) + 0.5
        assert float(model.potential_energy(x)) == pytest.approx(expected)

    def test_document_is_json_serialisable(self, two_ridge_model):
        assert json.loads(json.dumps(two_ridge_model.to_document()))["cutoff"] == 8


# ─── Benchmarks ──────────────────────────────────────────────────

class TestBenchmarks:
    def test_registry(self):
        assert {"flat", "ridge", "double_ridge", "two_ridge", "random"} <= set(list_benchmarks())

    def test_unknown(self):
        with pytest.raises(KeyError):
            get_benchmark("nope")

    def test_random_is_seeded(self):
        a = get_benchmark("random", seed=3)
        b = get_benchmark("random", seed=3)
        assert a.to_document() == b.to_document()

    def test_two_ridge_exchange_energy(self):
        assert two_ridge_exchange_energy() == pytest.approx(0.3)


# ─── Legendre transform ──────────────────────────────────────────

class TestLegendre:
    def test_identity_kinetic(self, ridge_model):
        x = np.array([0.7, 0.1])
        v = np.array([0.3, -1.2])
        y, H = legendre(ridge_model, x, v)
        assert np.allclose(y, v)
        assert float(H) == pytest.approx(0.5 * v @ v + RIDGE_EPS * np.cos(0.7))

    def test_roundtrip_non_identity(self, two_ridge_model, rng):
        x = rng.uniform(0, TWO_PI, size=(20, 2))
        v = rng.normal(size=(20, 2))
        y, _ = legendre(two_ridge_model, x, v)
        assert np.allclose(velocity_from_momentum(two_ridge_model, x, y), v, atol=1e-10)

    def test_roundtrip_thousand_samples(self, two_ridge_model, rng):
        x = rng.uniform(0, TWO_PI, size=(1000, 2))
        v = rng.normal(scale=2.0, size=(1000, 2))
        y, H = legendre(two_ridge_model, x, v)
        back = velocity_from_momentum(two_ridge_model, x, y)
        assert np.max(np.abs(back - v)) < 1e-10
        assert np.allclose(H, hamiltonian(two_ridge_model, x, y), atol=1e-12)

    def test_legendre_identity(self, two_ridge_model, rng):
        x = rng.uniform(0, TWO_PI, size=(10, 2))
        v = rng.normal(size=(10, 2))
        y, _ = legendre(two_ridge_model, x, v)
        H = hamiltonian(two_ridge_model, x, y)
        L = evaluate_lagrangian(two_ridge_model, x, v)
        assert np.allclose(H + L, np.einsum("na,na->n", y, v))


# ─── Euler-Lagrange flow ─────────────────────────────────────────

class TestFlow:
    def test_free_motion_is_straight(self, flat_model):
        v0 = np.array([0.3, 1.1])
        orbit = integrate_el(flat_model, [0.5, 0.2], v0, T=3.0, steps=64)
        expected = np.array([0.5, 0.2]) + 3.0 * v0
        assert np.allclose(orbit.positions[-1], expected, atol=1e-12)
        assert orbit.energy_drift < 1e-12

    def test_ridge_symmetry_plane(self, ridge_model):
        speed = np.sqrt(2 * (RIDGE_ENERGY - RIDGE_EPS))
        T = TWO_PI / speed
        orbit = integrate_el(ridge_model, [0.0, 0.0], [0.0, speed], T=T, steps=256)
        assert np.max(np.abs(orbit.positions[:, 0])) < 1e-8
        assert orbit.winding == (0, 1)

    def test_energy_drift(self):
        model = get_benchmark("random", seed=7)
        orbit = integrate_el(model, [0.1, 0.2], [0.2, 1.3], T=5.0, steps=512)
        assert orbit.energy_drift < 1e-8

    def test_rejects_bad_arguments(self, flat_model):
        with pytest.raises(ValueError):
            integrate_el(flat_model, [0, 0], [0, 1], T=1.0, steps=8)
        with pytest.raises(ValueError):
            integrate_el(flat_model, [0, 0], [0, 1], T=0.0)


# ─── Monodromy ───────────────────────────────────────────────────

class TestMonodromy:
    def _ridge_orbit(self, model, energy, eps0):
        speed = np.sqrt(2 * (energy - eps0))
        T = TWO_PI / speed
        return integrate_el(model, [0.0, 0.0], [0.0, speed], T=T, steps=512), T

    def test_free_orbit_non_hyperbolic(self, flat_model):
        orbit = integrate_el(flat_model, [0.0, 0.0], [0.0, 1.0], T=TWO_PI, steps=128)
        result = monodromy(flat_model, orbit)
        assert result.verdict == FloquetVerdict.NON_HYPERBOLIC
        assert result.degenerate
        assert np.allclose(result.multipliers, 1.0, atol=1e-6)

    def test_ridge_multipliers(self, ridge_model):
        orbit, T = self._ridge_orbit(ridge_model, RIDGE_ENERGY, RIDGE_EPS)
        result = monodromy(ridge_model, orbit)
        expected = np.exp(np.sqrt(RIDGE_EPS) * T)
        assert result.verdict == FloquetVerdict.HYPERBOLIC
        assert result.modulus == pytest.approx(expected, rel=1e-5)
        assert result.determinant == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("model_name", ["ridge", "two_ridge"])
    def test_commutes_with_reflection(self, model_name):
        # x1 -> -x1 fixes the orbit over x1 = 0 in both models
        model = get_benchmark(model_name)
        orbit, _ = self._ridge_orbit(model, RIDGE_ENERGY, RIDGE_EPS)
        matrix = monodromy(model, orbit).matrix
        reflection = np.diag([-1.0, 1.0, -1.0, 1.0])
        scale = np.max(np.abs(matrix))
        assert np.allclose(reflection @ matrix @ reflection, matrix, atol=1e-8 * scale)

    def test_not_closed(self, ridge_model):
        orbit = integrate_el(ridge_model, [0.3, 0.0], [0.0, 1.0], T=2.0, steps=128)
        with pytest.raises(NotClosed):
            monodromy(ridge_model, orbit)

    def test_deflate_keeps_transverse_pair(self):
        lam = np.array([1.0, 1.0, 4.0, 0.25], dtype=complex)
        transverse, verdict, degenerate = deflate(lam, 1e-4)
        assert sorted(np.abs(transverse)) == pytest.approx([0.25, 4.0])
        assert verdict == FloquetVerdict.HYPERBOLIC
        assert not degenerate
