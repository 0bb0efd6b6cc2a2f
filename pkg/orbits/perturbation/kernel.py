"""First-order response of the action F(x0, E) to a potential perturbation.

Replacing V by V + eps P changes the reduced Lagrangian by eps G P to first
order, with G = dLbar/dV = -dt/dtau. Along the minimiser through x0 this gives

    F_{V + eps P}(x0, E) = F_V(x0, E) + eps K_E P(x0) + o(eps),
    K_E P(x0) = integral over [0, 2 pi] of G P(gamma(tau), sigma tau) dtau.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import simpson

from orbits.classifier.profile import inner_solve
from orbits.discrete.configuration import Configuration, evaluate
from orbits.discrete.jacobi import is_positive_definite
from orbits.errors import NewtonDivergence, NonUniqueMinimizer
from orbits.model.fourier import FourierTable
from orbits.reduction.system import ReducedSystem

logger = logging.getLogger(__name__)

Potential = Callable[[NDArray], NDArray]
Weight = Callable[[NDArray, NDArray], NDArray]     # (taus, states) -> weight


# ─── Fourier perturbation family ─────────────────────────────────


@dataclass(frozen=True)
class FourierPerturbation:
    """sum over l = 1, 2 of A_l cos(l x1) + B_l sin(l x1), constant in x2."""

    A1: float
    B1: float
    A2: float
    B2: float
    epsilon: float = 1e-2

    def __post_init__(self) -> None:
        for name in ("A1", "B1", "A2", "B2"):
            value = getattr(self, name)
            if not 1.0 <= value <= 2.0:
                raise ValueError(f"{name}={value} outside [1, 2]")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    @classmethod
    def sample(cls, rng: np.random.Generator, epsilon: float) -> FourierPerturbation:
        A1, B1, A2, B2 = rng.uniform(1.0, 2.0, size=4)
        return cls(float(A1), float(B1), float(A2), float(B2), epsilon)

    @property
    def as_potential(self) -> FourierTable:
        return FourierTable.from_rows([[1, 0, self.A1, self.B1], [2, 0, self.A2, self.B2]])

    @property
    def parameters(self) -> list[float]:
        return [self.A1, self.B1, self.A2, self.B2]

    def to_dict(self) -> dict:
        return {"A1": self.A1, "B1": self.B1, "A2": self.A2, "B2": self.B2, "epsilon": self.epsilon}


def fourier_mode(ell: int, kind: str = "cos") -> FourierTable:
    """cos(l x1) or sin(l x1) lifted to the torus."""
    if kind == "cos":
        return FourierTable.from_rows([[ell, 0, 1.0, 0.0]])
    return FourierTable.from_rows([[ell, 0, 0.0, 1.0]])


def perturbed_system(rs: ReducedSystem, P: FourierTable, eps: float) -> ReducedSystem:
    """Reduced system of the model with V replaced by V + eps P."""
    model = rs.model
    shifted = replace(
        model,
        potential=model.potential + P.scaled(eps),
        cutoff=max(model.cutoff, P.cutoff),
    )
    return ReducedSystem(model=shifted, energy=rs.energy, config=rs.config)


# ─── Kernel ──────────────────────────────────────────────────────


@dataclass
class KernelSample:
    x: float
    E: float
    value: float
    quadrature_error: float
    remainder_estimate: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "x": self.x,
            "E": self.E,
            "value": self.value,
            "quadrature_error": self.quadrature_error,
            "remainder_estimate": self.remainder_estimate,
        }


@dataclass
class KernelPath:
    """The minimiser through x0 sampled uniformly in tau over one period."""

    taus: NDArray
    states: NDArray
    weight: NDArray           # G along the path
    configuration: Configuration


def minimiser_path(
    rs: ReducedSystem, x0: float, init: Configuration | None = None
) -> KernelPath:
    """Sample gamma(., x0, E), checking that x0 lies in a smooth window.

    Raises:
        NonUniqueMinimizer: the inner solve fails or J_{m-1} is not positive definite.
    """
    try:
        cfg = inner_solve(rs, x0, init)
    except NewtonDivergence as e:
        raise NonUniqueMinimizer(f"x0={x0:.6f} outside a smooth window: {e}", x0=x0) from e
    evaluation = evaluate(cfg, rs, record=True)
    if not is_positive_definite(evaluation.jacobi_dense()[0, 1:, 1:]):
        raise NonUniqueMinimizer(f"J_(m-1) not positive definite at x0={x0:.6f}", x0=x0)
    batch = evaluation.arcs.batch
    taus = np.concatenate([batch.taus[:, :-1].ravel(), batch.taus[-1:, -1]])
    states = np.concatenate([batch.samples[:, :-1].reshape(-1, 4), batch.samples[-1:, -1]])
    rates = np.concatenate([batch.rates[:, :-1].ravel(), batch.rates[-1:, -1]])
    return KernelPath(taus=taus, states=states, weight=-rates, configuration=cfg)


def _quadrature(taus: NDArray, integrand: NDArray) -> tuple[float, float]:
    full = float(simpson(integrand, x=taus))
    half = float(simpson(integrand[::2], x=taus[::2]))
    return full, abs(full - half) / 15.0


def kernel_sample(
    rs: ReducedSystem,
    x0: float,
    P: Potential,
    weight: Weight | None = None,
    init: Configuration | None = None,
) -> KernelSample:
    """K_E P(x0) by composite Simpson along the stored arc samples."""
    path = minimiser_path(rs, x0, init)
    G = path.weight if weight is None else np.asarray(weight(path.taus, path.states), float)
    values = np.asarray(P(path.states[:, :2]), float)
    value, error = _quadrature(path.taus, G * values)
    logger.debug(f"K P({x0:.6f}) = {value:.12e} (quadrature error {error:.2e})")
    return KernelSample(x=float(x0), E=rs.energy, value=value, quadrature_error=error)


def kernel_K(
    rs: ReducedSystem,
    x0: float,
    P: Potential,
    weight: Weight | None = None,
    init: Configuration | None = None,
) -> float:
    """K_E P(x0) = integral of G P along the minimiser through x0."""
    return kernel_sample(rs, x0, P, weight, init).value


# ─── First-order check ───────────────────────────────────────────


@dataclass
class FirstOrderReport:
    x0: float
    kernel: float
    eps: list[float] = field(default_factory=list)
    residuals: list[float] = field(default_factory=list)
    fitted_order: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "x0": self.x0,
            "kernel": self.kernel,
            "eps": list(self.eps),
            "residuals": list(self.residuals),
            "fitted_order": self.fitted_order,
        }


def first_order_check(
    rs_builder: Callable[[float], ReducedSystem],
    x0: float,
    P: Potential,
    eps_list: Sequence[float],
) -> FirstOrderReport:
    """Residual F_{V + eps P} - F_V - eps K P at x0 for each eps, with its log-log order.

    ``rs_builder(eps)`` returns the reduced system of the perturbed model;
    ``rs_builder(0)`` is the unperturbed one.
    """
    base_rs = rs_builder(0.0)
    path = minimiser_path(base_rs, x0)
    base_action = float(evaluate(path.configuration, base_rs).total_action[0])
    kernel = _quadrature(path.taus, path.weight * np.asarray(P(path.states[:, :2]), float))[0]
    report = FirstOrderReport(x0=float(x0), kernel=kernel)

    for eps in eps_list:
        if eps == 0:
            residual = 0.0
        else:
            rs = rs_builder(float(eps))
            cfg = inner_solve(rs, x0, path.configuration)
            action = float(evaluate(cfg, rs).total_action[0])
            residual = action - base_action - eps * kernel
        report.eps.append(float(eps))
        report.residuals.append(float(residual))
        logger.info(f"eps={eps:.3e}: first-order residual {residual:.3e}")

    usable = [(e, abs(r)) for e, r in zip(report.eps, report.residuals) if e > 0 and r != 0]
    if len(usable) >= 2:
        data = np.log(np.array(usable))
        report.fitted_order = float(np.polyfit(data[:, 0], data[:, 1], 1)[0])
    return report


# ─── Fourier response ────────────────────────────────────────────


def fourier_response(
    rs: ReducedSystem,
    x_grid: ArrayLike,
    ell: int,
    weight: Weight | None = None,
) -> tuple[NDArray, NDArray]:
    """Coefficients u_l, v_l of K cos(l x) = u cos(l x) - v sin(l x), K sin(l x) = u sin + v cos.

    With k_c = K cos(l .)(x) and k_s = K sin(l .)(x):
    u = k_c cos(l x) + k_s sin(l x),  v = -k_c sin(l x) + k_s cos(l x).
    """
    if ell not in (1, 2):
        raise ValueError(f"ell must be 1 or 2, got {ell}")
    x_grid = np.asarray(x_grid, dtype=float)
    cos_mode, sin_mode = fourier_mode(ell, "cos"), fourier_mode(ell, "sin")
    u = np.empty_like(x_grid)
    v = np.empty_like(x_grid)
    previous: Configuration | None = None
    for k, x in enumerate(x_grid):
        path = minimiser_path(rs, float(x), previous)
        previous = path.configuration
        G = path.weight if weight is None else np.asarray(weight(path.taus, path.states), float)
        points = path.states[:, :2]
        k_c = _quadrature(path.taus, G * cos_mode(points))[0]
        k_s = _quadrature(path.taus, G * sin_mode(points))[0]
        c, s = np.cos(ell * x), np.sin(ell * x)
        u[k] = k_c * c + k_s * s
        v[k] = -k_c * s + k_s * c
    return u, v
