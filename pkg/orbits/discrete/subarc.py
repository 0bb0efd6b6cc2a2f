"""Sub-arc actions F_i(x, x', E) by shooting with the reduced flow.

Each sub-arc runs over [2 pi i / m, 2 pi (i + 1) / m] in tau. The endpoint
mismatch x1(tau_{i+1}) - x' is driven to zero by Newton on the initial
momentum y, whose derivative is the STM entry b = dx'/dy. With the STM
[[a, b], [c, d]] the generating-function derivatives are

    F_x = -y,  F_x' = y',  F_xx = a / b,  F_x'x' = d / b,  F_xx' = -1 / b.

Twist (F_xx' < 0) is b > 0. Arcs that fail to converge from the straight-line
seed are reseeded with a direct minimisation of the discretised action.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import minimize

from orbits.errors import BranchViolation, BvpNonConvergence, StripExit
from orbits.reduction.flow import ArcBatch, propagate
from orbits.reduction.system import ReducedSystem

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


@dataclass
class ArcSolution:
    """A batch of solved sub-arcs with their generating-function derivatives."""

    x: NDArray
    x_prime: NDArray
    tau0: NDArray
    momentum: NDArray       # y at the arc start
    value: NDArray
    d_x: NDArray
    d_xp: NDArray
    d_xx: NDArray
    d_xpxp: NDArray
    d_xxp: NDArray
    batch: ArcBatch

    @property
    def duration(self) -> NDArray:
        return self.batch.duration

    def predict_momentum(self, x: ArrayLike, x_prime: ArrayLike) -> NDArray:
        """First-order momentum guess after the endpoints move."""
        dx = np.asarray(x, float) - self.x
        dxp = np.asarray(x_prime, float) - self.x_prime
        return self.momentum - self.d_xx * dx - self.d_xxp * dxp


@dataclass
class SubArcResult:
    """One sub-arc F_i with its sampled minimising curve."""

    i: int
    x: float
    x_prime: float
    E: float
    value: float
    d_x: float
    d_xp: float
    d_xx: float
    d_xpxp: float
    d_xxp: float
    arc_tau: NDArray
    arc_x1: NDArray
    arc_y1: NDArray

    @property
    def twist(self) -> bool:
        return self.d_xxp < 0


def _shoot(
    rs: ReducedSystem,
    x: NDArray,
    x_prime: NDArray,
    tau0: NDArray,
    h: float,
    y: NDArray,
    record: bool,
) -> tuple[NDArray, ArcBatch, NDArray]:
    """Newton iterations on y; returns final y, last batch and a convergence mask."""
    disc = rs.discretization
    tol = rs.tolerances.shooting * (1.0 + np.abs(x_prime))
    bound = 0.999 * rs.momentum_bound(x, tau0)
    y = np.clip(y, -bound, bound)
    for iteration in range(disc.shooting_iterations):
        batch = propagate(rs, x, y, tau0, h, disc.substeps, record=record)
        residual = batch.end[:, 0] - x_prime
        converged = np.abs(residual) <= tol
        if converged.all():
            return y, batch, converged
        b = batch.stm[:, 0, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(b > 0, residual / b, np.sign(residual) * 0.1 * bound)
        step = np.clip(np.nan_to_num(step), -0.25 * bound, 0.25 * bound)
        y = np.clip(y - np.where(converged, 0.0, step), -bound, bound)
        logger.debug(
            f"Shooting iteration {iteration}: max residual {np.max(np.abs(residual)):.3e}"
        )
    return y, batch, converged


def direct_guess(rs: ReducedSystem, x: float, x_prime: float, tau0: float, h: float) -> float:
    """Initial momentum from minimising the piecewise-linear discretised action."""
    n = rs.discretization.direct_nodes
    taus = tau0 + h * np.arange(n + 2) / (n + 1)
    delta = h / (n + 1)
    mid_taus = 0.5 * (taus[1:] + taus[:-1])

    def action(interior: NDArray) -> float:
        nodes = np.concatenate([[x], interior, [x_prime]])
        mids = 0.5 * (nodes[1:] + nodes[:-1])
        return float(delta * np.sum(rs.closed_lagrangian(mids, np.diff(nodes) / delta, mid_taus)))

    start = np.linspace(x, x_prime, n + 2)[1:-1]
    result = minimize(action, start, method="BFGS")
    nodes = np.concatenate([[x], result.x, [x_prime]])
    return float(rs.closed_momentum(x, (nodes[1] - nodes[0]) / delta, tau0))


def straight_guess(
    rs: ReducedSystem, x: ArrayLike, x_prime: ArrayLike, tau0: ArrayLike, h: float
) -> NDArray:
    """Momentum of the straight segment from x to x'."""
    x = np.asarray(x, float)
    return rs.closed_momentum(x, (np.asarray(x_prime, float) - x) / h, tau0)


def solve_arcs(
    rs: ReducedSystem,
    x: ArrayLike,
    x_prime: ArrayLike,
    tau0: ArrayLike,
    h: float,
    guess: ArrayLike | None = None,
    record: bool = False,
) -> ArcSolution:
    """Solve a batch of sub-arc boundary value problems.

    Raises:
        BvpNonConvergence: an arc fails from both seeds, or violates twist.
        StripExit: an arc leaves the strip.
        BranchViolation: sigma dH/dy2 drops below the floor along an arc.
    """
    x, x_prime, tau0 = (np.atleast_1d(np.asarray(a, float)) for a in (x, x_prime, tau0))
    x, x_prime, tau0 = (np.array(a) for a in np.broadcast_arrays(x, x_prime, tau0))
    y0 = straight_guess(rs, x, x_prime, tau0, h) if guess is None else np.asarray(guess, float)

    y, batch, converged = _shoot(rs, x, x_prime, tau0, h, y0, record)
    if not converged.all():
        failed = np.flatnonzero(~converged)
        logger.info(f"Reseeding {failed.size} sub-arc(s) with the direct method")
        y[failed] = [direct_guess(rs, x[k], x_prime[k], tau0[k], h) for k in failed]
        y, batch, converged = _shoot(rs, x, x_prime, tau0, h, y, record)
        if not converged.all():
            failed = np.flatnonzero(~converged)
            raise BvpNonConvergence(
                f"{failed.size} sub-arc(s) did not converge; increase m",
                arcs=failed.tolist(),
            )

    a, b = batch.stm[:, 0, 0], batch.stm[:, 0, 1]
    d = batch.stm[:, 1, 1]
    if np.any(b <= 0):
        raise BvpNonConvergence(
            "twist condition violated (conjugate point inside a sub-arc); increase m",
            arcs=np.flatnonzero(b <= 0).tolist(),
        )
    if not (np.all(rs.in_strip(batch.x1_min)) and np.all(rs.in_strip(batch.x1_max))):
        raise StripExit(
            f"sub-arc leaves the strip {rs.strip}",
            x1_min=float(batch.x1_min.min()),
            x1_max=float(batch.x1_max.max()),
        )
    if np.any(batch.min_speed <= rs.tolerances.branch_floor):
        raise BranchViolation("dH/dy2 changes sign along a sub-arc")

    return ArcSolution(
        x=x,
        x_prime=x_prime,
        tau0=tau0,
        momentum=y,
        value=batch.action,
        d_x=-y,
        d_xp=batch.end[:, 2],
        d_xx=a / b,
        d_xpxp=d / b,
        d_xxp=-1.0 / b,
        batch=batch,
    )


def subarc_action(rs: ReducedSystem, i: int, x: float, x_prime: float, m: int) -> SubArcResult:
    """Sub-arc action F_i(x, x', E) on [2 pi i / m, 2 pi (i + 1) / m]."""
    if m < 1 or not 0 <= i < m:
        raise ValueError(f"need 0 <= i < m, got i={i}, m={m}")
    h = TWO_PI / m
    sol = solve_arcs(rs, x, x_prime, h * i, h, record=True)
    batch = sol.batch
    return SubArcResult(
        i=i,
        x=float(x),
        x_prime=float(x_prime),
        E=rs.energy,
        value=float(sol.value[0]),
        d_x=float(sol.d_x[0]),
        d_xp=float(sol.d_xp[0]),
        d_xx=float(sol.d_xx[0]),
        d_xpxp=float(sol.d_xpxp[0]),
        d_xxp=float(sol.d_xxp[0]),
        arc_tau=batch.taus[0],
        arc_x1=batch.samples[0, :, 0],
        arc_y1=batch.samples[0, :, 2],
    )


def unique_subarc(
    rs: ReducedSystem, i: int, x: float, x_prime: float, m: int
) -> tuple[bool, float]:
    """Solve from the straight and the direct seed; report agreement of momenta."""
    h = TWO_PI / m
    tau0 = h * i
    first = solve_arcs(rs, x, x_prime, tau0, h)
    second = solve_arcs(rs, x, x_prime, tau0, h, guess=[direct_guess(rs, x, x_prime, tau0, h)])
    gap = float(abs(first.momentum[0] - second.momentum[0]))
    return gap <= rs.tolerances.uniqueness, gap
