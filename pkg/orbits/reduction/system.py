"""Energy-level reduction to a time-periodic one-degree-of-freedom system.

On the energy shell H(x1, x2, y1, y2) = E, the angle x2 plays the role of
time: tau = sigma x2 with sigma the branch orientation. The reduced
Hamiltonian is Hbar = -sigma y2, where y2 is the root of the shell equation
with sigma dH/dy2 > 0. With this convention the reduced Lagrangian

    Lbar(x1, xdot, tau) = xdot y1 - Hbar = sqrt(2 (E - V) <A w, w>),  w = (xdot, sigma)

is strictly convex in xdot for either orientation, and G = -1 / (sigma dH/dy2) < 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import newton

from orbits.config import SolverConfig
from orbits.errors import (
    BranchViolation,
    MomentumSolveFailure,
    NewtonDivergence,
    OutsideEnergyShell,
)
from orbits.model.spec import ModelSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ReducedSystem:
    """A model restricted to the energy level E, with x2 as time."""

    model: ModelSpec
    energy: float
    config: SolverConfig = field(default_factory=SolverConfig)

    @property
    def strip(self) -> tuple[float, float]:
        return self.config.reduction.strip

    @property
    def branch_orientation(self) -> int:
        return self.config.reduction.branch_orientation

    @property
    def tolerances(self):
        return self.config.tolerances

    @property
    def discretization(self):
        return self.config.discretization

    def at_energy(self, energy: float) -> ReducedSystem:
        return ReducedSystem(model=self.model, energy=energy, config=self.config)

    def in_strip(self, x1: ArrayLike) -> NDArray:
        lo, hi = self.strip
        x1 = np.asarray(x1, dtype=float)
        return (x1 > lo) & (x1 < hi)

    def position(self, x1: ArrayLike, tau: ArrayLike) -> NDArray:
        """Torus point (x1, sigma tau)."""
        x1, tau = np.broadcast_arrays(np.asarray(x1, float), np.asarray(tau, float))
        return np.stack([x1, self.branch_orientation * tau], axis=-1)

    # ─── Shell geometry ──────────────────────────────────────────

    def _inverse_metric(self, x: NDArray) -> tuple[NDArray, NDArray, NDArray, NDArray, NDArray]:
        A = self.model.kinetic_matrix(x)
        B = np.linalg.inv(A)
        return B[..., 0, 0], B[..., 0, 1], B[..., 1, 1], A, self.model.potential_energy(x)

    def momentum_bound(self, x1: ArrayLike, tau: ArrayLike) -> NDArray:
        """Largest |y1| for which the shell has a real y2 root: sqrt(2 (E - V) a11)."""
        x = self.position(x1, tau)
        A = self.model.kinetic_matrix(x)
        head = 2.0 * (self.energy - self.model.potential_energy(x))
        return np.sqrt(np.clip(head, 0.0, None) * A[..., 0, 0])

    def shell_momentum(self, x1: ArrayLike, y1: ArrayLike, tau: ArrayLike) -> NDArray:
        """Root y2 of H(x1, sigma tau, y1, y2) = E on the sigma branch (vectorised).

        Safeguarded Newton from the outer end of a sampled bracket, with
        bisection whenever a Newton step leaves the bracket.

        Raises:
            OutsideEnergyShell: no real root for some input.
            BranchViolation: sigma dH/dy2 at the root below the branch floor.
        """
        sigma = self.branch_orientation
        tol = self.tolerances
        x1, y1, tau = np.broadcast_arrays(
            np.asarray(x1, float), np.asarray(y1, float), np.asarray(tau, float)
        )
        x = self.position(x1, tau)
        b11, b12, b22, _, V = self._inverse_metric(x)

        def phi(y2: NDArray) -> NDArray:
            return 0.5 * b22 * y2**2 + b12 * y1 * y2 + 0.5 * b11 * y1**2 + V - self.energy

        vertex = -b12 * y1 / b22
        if np.any(phi(vertex) > 0):
            bad = np.flatnonzero(np.ravel(phi(vertex) > 0))
            raise OutsideEnergyShell(
                f"no energy-shell root for {bad.size} input(s) at E={self.energy}",
                count=int(bad.size),
            )

        # Bracket [lo, hi]: phi(lo) <= 0 < phi(hi), hi on the sigma side
        lo = vertex.copy()
        step = np.full_like(vertex, self.config.reduction.y2_search_step)
        hi = vertex + sigma * step
        for _ in range(self.config.reduction.y2_search_doublings):
            short = phi(hi) <= 0
            if not short.any():
                break
            step = np.where(short, 2.0 * step, step)
            hi = np.where(short, vertex + sigma * step, hi)
        else:
            raise OutsideEnergyShell("energy-shell bracket search exhausted")

        y2 = hi
        scale = 1.0 + abs(self.energy)
        for _ in range(100):
            f = phi(y2)
            if np.max(np.abs(f), initial=0.0) <= tol.root * scale:
                break
            slope = b22 * y2 + b12 * y1
            with np.errstate(divide="ignore", invalid="ignore"):
                candidate = y2 - f / slope
            inside = np.isfinite(candidate) & ((candidate - lo) * (hi - candidate) > 0)
            candidate = np.where(inside, candidate, 0.5 * (lo + hi))
            fc = phi(candidate)
            hi = np.where(fc > 0, candidate, hi)
            lo = np.where(fc <= 0, candidate, lo)
            y2 = candidate
        else:
            raise NewtonDivergence("energy-shell root did not converge")

        speed = sigma * (b12 * y1 + b22 * y2)
        if np.any(speed <= tol.branch_floor):
            raise BranchViolation(
                f"sigma dH/dy2 = {float(np.min(speed)):.3e} at the selected root",
                speed=float(np.min(speed)),
            )
        return y2

    def shell_state(self, x1: ArrayLike, y1: ArrayLike, tau: ArrayLike) -> NDArray:
        """Full phase state (x1, x2, y1, y2) on the energy shell."""
        y1 = np.asarray(y1, dtype=float)
        y2 = self.shell_momentum(x1, y1, tau)
        x = self.position(x1, tau)
        return np.concatenate([x, np.stack(np.broadcast_arrays(y1, y2), axis=-1)], axis=-1)

    # ─── Closed forms for the quadratic kinetic family ───────────

    def closed_lagrangian(self, x1: ArrayLike, xdot: ArrayLike, tau: ArrayLike) -> NDArray:
        """Lbar = sqrt(2 (E - V) <A w, w>) with w = (xdot, sigma)."""
        x = self.position(x1, tau)
        xdot = np.broadcast_to(np.asarray(xdot, float), x.shape[:-1])
        w = np.stack([xdot, np.full_like(xdot, self.branch_orientation)], axis=-1)
        A = self.model.kinetic_matrix(x)
        norm = np.einsum("...a,...ab,...b->...", w, A, w)
        head = self.energy - self.model.potential_energy(x)
        return np.sqrt(2.0 * np.clip(head, 0.0, None) * norm)

    def closed_momentum(self, x1: ArrayLike, xdot: ArrayLike, tau: ArrayLike) -> NDArray:
        """y1 of the trajectory through x1 with reduced velocity xdot."""
        x = self.position(x1, tau)
        xdot = np.broadcast_to(np.asarray(xdot, float), x.shape[:-1])
        w = np.stack([xdot, np.full_like(xdot, self.branch_orientation)], axis=-1)
        A = self.model.kinetic_matrix(x)
        Aw = np.einsum("...ab,...b->...a", A, w)
        norm = np.einsum("...a,...a->...", w, Aw)
        head = np.clip(self.energy - self.model.potential_energy(x), 0.0, None)
        return np.sqrt(2.0 * head / norm) * Aw[..., 0]

    # ─── Reduced velocity ────────────────────────────────────────

    def _velocity_and_slope(self, x1: float, y1: float, tau: float) -> tuple[float, float]:
        """xdot = dHbar/dy1 = sigma H_y1 / H_y2 and its derivative along the shell."""
        sigma = self.branch_orientation
        x = self.position(x1, tau)
        b11, b12, b22, _, _ = self._inverse_metric(x)
        y2 = self.shell_momentum(x1, y1, tau)
        h1 = b11 * y1 + b12 * y2
        h2 = b12 * y1 + b22 * y2
        dy2 = -h1 / h2
        dh1 = b11 + b12 * dy2
        dh2 = b12 + b22 * dy2
        return float(sigma * h1 / h2), float(sigma * (dh1 * h2 - h1 * dh2) / h2**2)


# ─── Reduction operations ────────────────────────────────────────


def solve_hbar(rs: ReducedSystem, x1: float, y1: float, tau: float) -> float:
    """Reduced Hamiltonian Hbar(x1, y1, tau) = -sigma y2 on the energy shell."""
    y2 = rs.shell_momentum(x1, y1, tau)
    return float(-rs.branch_orientation * y2)


def g_factor(rs: ReducedSystem, x1: float, y1: float, tau: float) -> float:
    """G = -1 / (sigma dH/dy2); negative on the valid branch."""
    sigma = rs.branch_orientation
    x = rs.position(x1, tau)
    _, b12, b22, _, _ = rs._inverse_metric(x)
    y2 = rs.shell_momentum(x1, y1, tau)
    return float(-1.0 / (sigma * (b12 * y1 + b22 * y2)))


def reduced_lagrangian(
    rs: ReducedSystem, x1: float, xdot: float, tau: float
) -> tuple[float, float]:
    """Lbar(x1, xdot, tau) and the momentum y1 solving xdot = dHbar/dy1.

    Seeded with the closed-form momentum, then polished by Newton.

    Raises:
        MomentumSolveFailure: the inversion fails or leaves the energy shell.
    """
    guess = float(rs.closed_momentum(x1, xdot, tau))

    def residual(y1: float) -> float:
        return rs._velocity_and_slope(x1, y1, tau)[0] - xdot

    def slope(y1: float) -> float:
        return rs._velocity_and_slope(x1, y1, tau)[1]

    try:
        y1 = float(newton(residual, guess, fprime=slope, tol=1e-14, maxiter=50))
        hbar = solve_hbar(rs, x1, y1, tau)
    except (RuntimeError, OutsideEnergyShell, BranchViolation, NewtonDivergence) as e:
        raise MomentumSolveFailure(
            f"cannot invert xdot={xdot} at x1={x1}, tau={tau}: {e}", xdot=xdot
        ) from e
    return xdot * y1 - hbar, y1


@dataclass(frozen=True, eq=False)
class ReducedFamily:
    """Energy-indexed family of reduced systems over one model."""

    model: ModelSpec
    config: SolverConfig = field(default_factory=SolverConfig)

    def at(self, energy: float) -> ReducedSystem:
        return ReducedSystem(model=self.model, energy=float(energy), config=self.config)

    __call__ = at
