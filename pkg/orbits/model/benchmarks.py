"""Benchmark model registry.

Models register by name and are looked up with ``get_benchmark``. Each one
has an analytic oracle used by the test suite:

- ``flat``: A = I, U = 0. Invariant torus foliated by periodic orbits.
- ``ridge``: A = I, U = eps0 cos x1. Minimal orbit over x1 = 0.
- ``double_ridge``: A = I, U = eps0 cos 2 x1. Symmetric tie at x1 in {0, pi}.
- ``two_ridge``: a22 = 1 + 0.2 cos x1, U = 0.1 cos 2x1 + 0.04 cos x1. The
  straight orbits over x1 = 0 and x1 = pi exchange the global minimum at E = 0.3.
- ``random``: ridge plus a seeded small Fourier potential.
"""

from __future__ import annotations

from collections.abc import Callable

import numpy as np

from orbits.model.fourier import FourierTable
from orbits.model.spec import ModelSpec

BenchmarkFactory = Callable[..., ModelSpec]

_REGISTRY: dict[str, BenchmarkFactory] = {}


def register(name: str) -> Callable[[BenchmarkFactory], BenchmarkFactory]:
    """Register a model factory under ``name``."""

    def decorator(factory: BenchmarkFactory) -> BenchmarkFactory:
        _REGISTRY[name] = factory
        return factory

    return decorator


def get_benchmark(name: str, **params: float) -> ModelSpec:
    """Build a registered benchmark model."""
    try:
        factory = _REGISTRY[name]
    except KeyError as e:
        raise KeyError(f"unknown benchmark {name!r}; known: {list_benchmarks()}") from e
    return factory(**params)


def list_benchmarks() -> list[str]:
    return sorted(_REGISTRY)


def _identity_kinetic() -> tuple[FourierTable, FourierTable, FourierTable]:
    one = FourierTable.constant(1.0)
    return (one, FourierTable.zero(), one)


@register("flat")
def flat_torus() -> ModelSpec:
    return ModelSpec(kinetic=_identity_kinetic())


@register("ridge")
def ridge(eps0: float = 0.1) -> ModelSpec:
    return ModelSpec(
        kinetic=_identity_kinetic(),
        potential=FourierTable.from_rows([[1, 0, eps0, 0.0]]),
    )


@register("double_ridge")
def double_ridge(eps0: float = 0.1) -> ModelSpec:
    return ModelSpec(
        kinetic=_identity_kinetic(),
        potential=FourierTable.from_rows([[2, 0, eps0, 0.0]]),
    )


@register("two_ridge")
def two_ridge(a: float = 0.1, b: float = 0.04, c: float = 0.2) -> ModelSpec:
    """Exchange energy E* solves (E* - a - b)(1 + c) = (E* - a + b)(1 - c)."""
    one = FourierTable.constant(1.0)
    return ModelSpec(
        kinetic=(
            one,
            FourierTable.zero(),
            FourierTable.from_rows([[0, 0, 1.0, 0.0], [1, 0, c, 0.0]]),
        ),
        potential=FourierTable.from_rows([[2, 0, a, 0.0], [1, 0, b, 0.0]]),
    )


@register("random")
def random_model(
    seed: int = 0, eps0: float = 0.1, amplitude: float = 0.02, order: int = 2
) -> ModelSpec:
    """Ridge plus random modes |k1|, |k2| <= order with coefficients in [-amplitude, amplitude].

    The extra modes are small next to eps0, so the ridge orbit persists as the
    minimiser up to a shift.
    """
    rng = np.random.default_rng(int(seed))
    rows = [[1, 0, eps0, 0.0]]
    for k1 in range(0, int(order) + 1):
        for k2 in range(-int(order), int(order) + 1):
            if (k1, k2) <= (0, 0) or (k1, k2) == (1, 0):
                continue
            c, s = rng.uniform(-amplitude, amplitude, size=2)
            rows.append([k1, k2, float(c), float(s)])
    return ModelSpec(
        kinetic=_identity_kinetic(),
        potential=FourierTable.from_rows(rows),
        cutoff=max(8, int(order)),
    )


def two_ridge_exchange_energy(a: float = 0.1, b: float = 0.04, c: float = 0.2) -> float:
    """Energy where the x1 = 0 and x1 = pi orbits of ``two_ridge`` tie."""
    # (E - a - b)(1 + c) = (E - a + b)(1 - c)
    return a + b / c
