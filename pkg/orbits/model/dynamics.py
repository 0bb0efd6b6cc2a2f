"""Lagrangian and Hamiltonian dynamics of a model.

With B = A^{-1} and v = B y the Hamiltonian is H = 1/2 <y, B y> + V and

    H_x_j   = -1/2 v.(d_j A) v + d_j V
    H_y     = v
    H_yy    = B
    H_xy    = -B (d_j A) v
    H_xx_jl = -1/2 v.(d_jl A) v + (d_j A v).B(d_l A v) + d_jl V

Phase states are ordered (x1, x2, y1, y2). Everything here is vectorised over
leading batch axes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from orbits.errors import EnergyDriftExceeded, NewtonDivergence
from orbits.model.spec import ModelSpec

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi

# Symplectic form on (x1, x2, y1, y2)
SYMPLECTIC = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]])


@dataclass(frozen=True)
class PhasePoint:
    """A point of the tangent or cotangent bundle; angles reduced to [0, 2pi)."""

    x: tuple[float, float]
    v_or_y: tuple[float, float]

    @classmethod
    def reduced(cls, x: ArrayLike, v_or_y: ArrayLike) -> PhasePoint:
        x = np.mod(np.asarray(x, dtype=float), TWO_PI)
        w = np.asarray(v_or_y, dtype=float)
        return cls(x=(float(x[0]), float(x[1])), v_or_y=(float(w[0]), float(w[1])))


@dataclass
class PhaseGeometry:
    """H with gradient and Hessian at a batch of phase states."""

    H: NDArray          # (...,)
    v: NDArray          # (..., 2)  velocity = H_y
    grad: NDArray       # (..., 4)
    hess: NDArray       # (..., 4, 4)

    @property
    def vector_field(self) -> NDArray:
        """Hamiltonian vector field (H_y, -H_x)."""
        return np.concatenate([self.grad[..., 2:], -self.grad[..., :2]], axis=-1)

    @property
    def jacobian(self) -> NDArray:
        """Derivative of the vector field: J . Hess H."""
        return np.einsum("ab,...bc->...ac", SYMPLECTIC, self.hess)


def phase_geometry(model: ModelSpec, z: ArrayLike, second_order: bool = True) -> PhaseGeometry:
    """Evaluate H, its gradient and (optionally) Hessian at states z (..., 4)."""
    z = np.asarray(z, dtype=float)
    x, y = z[..., :2], z[..., 2:]
    f = model.fields(x)
    B = np.linalg.inv(f.A)
    v = np.einsum("...ab,...b->...a", B, y)
    dAv = np.einsum("...abj,...b->...aj", f.dA, v)
    H = 0.5 * np.einsum("...a,...a->...", y, v) + f.V
    H_x = -0.5 * np.einsum("...a,...aj->...j", v, dAv) + f.dV
    grad = np.concatenate([H_x, v], axis=-1)
    if not second_order:
        return PhaseGeometry(H=H, v=v, grad=grad, hess=np.empty((*H.shape, 4, 4)))

    H_xy = -np.einsum("...ba,...aj->...jb", B, dAv)
    H_xx = (
        -0.5 * np.einsum("...a,...abjl,...b->...jl", v, f.d2A, v)
        + np.einsum("...aj,...ab,...bl->...jl", dAv, B, dAv)
        + f.d2V
    )
    hess = np.empty((*H.shape, 4, 4))
    hess[..., :2, :2] = H_xx
    hess[..., :2, 2:] = H_xy
    hess[..., 2:, :2] = np.swapaxes(H_xy, -1, -2)
    hess[..., 2:, 2:] = B
    return PhaseGeometry(H=H, v=v, grad=grad, hess=hess)


# ─── Legendre transform ──────────────────────────────────────────


def evaluate_lagrangian(model: ModelSpec, x: ArrayLike, v: ArrayLike) -> NDArray:
    """L = 1/2 <A v, v> - U - eps P."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    A = model.kinetic_matrix(x)
    return 0.5 * np.einsum("...a,...ab,...b->...", v, A, v) - model.potential_energy(x)


def hamiltonian(model: ModelSpec, x: ArrayLike, y: ArrayLike) -> NDArray:
    z = np.concatenate(np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float)), axis=-1)
    return phase_geometry(model, z, second_order=False).H


def legendre(model: ModelSpec, x: ArrayLike, v: ArrayLike) -> tuple[NDArray, NDArray]:
    """Momentum y = dL/dv and energy H = <y, v> - L."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    y = np.einsum("...ab,...b->...a", model.kinetic_matrix(x), v)
    H = np.einsum("...a,...a->...", y, v) - evaluate_lagrangian(model, x, v)
    return y, H


def velocity_from_momentum(
    model: ModelSpec,
    x: ArrayLike,
    y: ArrayLike,
    tol: float = 1e-12,
    max_iter: int = 50,
) -> NDArray:
    """Invert y = dL/dv by Newton iteration.

    The fibre Hessian d2L/dv2 = A(x) is positive definite, so Newton started
    at v = 0 converges; for the quadratic family it does so in one step.

    Raises:
        NewtonDivergence: residual above tol after max_iter iterations.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    A = model.kinetic_matrix(x)
    v = np.zeros_like(y)
    scale = 1.0 + np.max(np.abs(y), initial=0.0)
    for iteration in range(max_iter):
        residual = np.einsum("...ab,...b->...a", A, v) - y
        if np.max(np.abs(residual), initial=0.0) <= tol * scale:
            return v
        v = v - np.linalg.solve(A, residual[..., None])[..., 0]
    raise NewtonDivergence(
        f"momentum inversion did not converge in {max_iter} iterations",
        residual=float(np.max(np.abs(residual))),
    )


# ─── Euler-Lagrange flow ─────────────────────────────────────────


@dataclass
class Trajectory:
    """Sampled solution of the Euler-Lagrange flow.

    ``positions`` keeps the lifted angles; ``states`` reduces them mod 2pi.
    """

    times: NDArray          # (n,)
    positions: NDArray      # (n, 2) lifted
    velocities: NDArray     # (n, 2)
    momenta: NDArray        # (n, 2)
    energies: NDArray       # (n,)
    winding: tuple[int, int]
    steps: int

    @property
    def period(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def states(self) -> list[PhasePoint]:
        return [PhasePoint.reduced(x, v) for x, v in zip(self.positions, self.velocities)]

    @property
    def energy_drift(self) -> float:
        return float(np.max(np.abs(self.energies - self.energies[0])))


def _rk4_flow(
    model: ModelSpec, z0: NDArray, T: float, steps: int, variational: bool
) -> tuple[NDArray, NDArray | None]:
    """Classical RK4 for the Hamiltonian flow, optionally with the 4x4 STM."""
    dt = T / steps
    samples = np.empty((steps + 1, 4))
    samples[0] = z0
    z = z0.copy()
    Phi = np.eye(4) if variational else None

    def rhs(state: NDArray, phi: NDArray | None) -> tuple[NDArray, NDArray | None]:
        geo = phase_geometry(model, state, second_order=variational)
        dz = geo.vector_field
        return dz, (geo.jacobian @ phi if phi is not None else None)

    for n in range(steps):
        k1, p1 = rhs(z, Phi)
        k2, p2 = rhs(z + 0.5 * dt * k1, None if Phi is None else Phi + 0.5 * dt * p1)
        k3, p3 = rhs(z + 0.5 * dt * k2, None if Phi is None else Phi + 0.5 * dt * p2)
        k4, p4 = rhs(z + dt * k3, None if Phi is None else Phi + dt * p3)
        z = z + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if Phi is not None:
            Phi = Phi + dt / 6.0 * (p1 + 2 * p2 + 2 * p3 + p4)
        samples[n + 1] = z
    return samples, Phi


def flow_with_variations(
    model: ModelSpec, z0: ArrayLike, T: float, steps: int
) -> tuple[NDArray, NDArray]:
    """Final state and 4x4 state-transition matrix after time T."""
    samples, Phi = _rk4_flow(model, np.asarray(z0, dtype=float), T, steps, variational=True)
    return samples[-1], Phi


def integrate_el(
    model: ModelSpec,
    x0: ArrayLike,
    v0: ArrayLike,
    T: float,
    steps: int = 256,
    drift_tolerance: float = 1e-8,
    max_doublings: int = 6,
) -> Trajectory:
    """Integrate the Euler-Lagrange flow from (x0, v0) over [0, T].

    The step count doubles until the energy drift is below tolerance.

    Raises:
        ValueError: steps < 64 or T <= 0.
        EnergyDriftExceeded: drift above tolerance after max_doublings.
    """
    if steps < 64:
        raise ValueError(f"steps must be >= 64, got {steps}")
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    x0 = np.asarray(x0, dtype=float)
    y0, _ = legendre(model, x0, v0)
    z0 = np.concatenate([x0, y0])

    for _ in range(max_doublings + 1):
        samples, _ = _rk4_flow(model, z0, T, steps, variational=False)
        geo = phase_geometry(model, samples, second_order=False)
        drift = float(np.max(np.abs(geo.H - geo.H[0])))
        if drift < drift_tolerance:
            break
        logger.debug(f"Energy drift {drift:.3e} at {steps} steps, doubling")
        steps *= 2
    else:
        raise EnergyDriftExceeded(
            f"energy drift {drift:.3e} above {drift_tolerance:.1e} at {steps // 2} steps",
            drift=drift,
            steps=steps // 2,
        )

    positions = samples[:, :2]
    winding = np.rint((positions[-1] - positions[0]) / TWO_PI).astype(int)
    return Trajectory(
        times=np.linspace(0.0, T, steps + 1),
        positions=positions,
        velocities=geo.v,
        momenta=samples[:, 2:],
        energies=geo.H,
        winding=(int(winding[0]), int(winding[1])),
        steps=steps,
    )
