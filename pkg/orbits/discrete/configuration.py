"""Periodic configurations and the total broken-geodesic action.

A configuration is m nodes x_0..x_{m-1} at tau_i = 2 pi i / m, closed up by
x_m = x_0 + 2 pi lift. Evaluation solves all m sub-arcs (for several
configurations at once) in one batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from orbits.discrete.subarc import ArcSolution, solve_arcs
from orbits.reduction.flow import ArcBatch
from orbits.reduction.system import ReducedSystem

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True, eq=False)
class Configuration:
    """Nodes of a broken geodesic; the closing node is implied by ``lift``."""

    points: NDArray
    energy: float
    lift: int = 0
    momenta: NDArray | None = field(default=None, repr=False)   # warm-start hint

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=float)
        if points.ndim != 1 or points.size < 3:
            raise ValueError(f"a configuration needs at least 3 nodes, got {points.shape}")
        object.__setattr__(self, "points", points)

    @property
    def m(self) -> int:
        return self.points.size

    @property
    def x0(self) -> float:
        return float(self.points[0])

    @property
    def closed_points(self) -> NDArray:
        return np.append(self.points, self.points[0] + TWO_PI * self.lift)

    @classmethod
    def constant(cls, x0: float, m: int, energy: float) -> Configuration:
        return cls(points=np.full(m, float(x0)), energy=energy)

    def with_points(self, points: ArrayLike, momenta: NDArray | None = None) -> Configuration:
        return Configuration(points=points, energy=self.energy, lift=self.lift, momenta=momenta)

    def at_energy(self, energy: float) -> Configuration:
        return Configuration(self.points, energy, self.lift, self.momenta)

    def to_dict(self) -> dict:
        return {"points": self.points.tolist(), "energy": self.energy, "lift": self.lift}


@dataclass
class ConfigurationEval:
    """Sub-arc data for a batch of n configurations of m nodes, arrays of shape (n, m)."""

    points: NDArray
    lift: int
    value: NDArray
    d_x: NDArray
    d_xp: NDArray
    d_xx: NDArray
    d_xpxp: NDArray
    d_xxp: NDArray
    momentum: NDArray
    duration: NDArray
    stm: NDArray            # (n, m, 2, 2)
    arcs: ArcSolution

    @property
    def m(self) -> int:
        return self.points.shape[1]

    @property
    def total_action(self) -> NDArray:
        return self.value.sum(axis=1)

    @property
    def residual(self) -> NDArray:
        """Discrete E-L residual d_xp[i - 1] + d_x[i]."""
        return np.roll(self.d_xp, 1, axis=1) + self.d_x

    @property
    def period(self) -> NDArray:
        """Physical period of the closed broken geodesic."""
        return self.duration.sum(axis=1)

    def jacobi_dense(self) -> NDArray:
        """Cyclic tridiagonal Hessian, shape (n, m, m)."""
        n, m = self.points.shape
        idx = np.arange(m)
        nxt = (idx + 1) % m
        J = np.zeros((n, m, m))
        J[:, idx, idx] = np.roll(self.d_xpxp, 1, axis=1) + self.d_xx
        J[:, idx, nxt] = self.d_xxp
        J[:, nxt, idx] = self.d_xxp
        return J

    def reduced_monodromy(self) -> NDArray:
        """Product of the sub-arc STMs in time order, shape (n, 2, 2)."""
        M = np.broadcast_to(np.eye(2), (self.points.shape[0], 2, 2)).copy()
        for i in range(self.m):
            M = self.stm[:, i] @ M
        return M

    def predict_momentum(self, points: ArrayLike) -> NDArray:
        """Linearised momenta for moved nodes, flattened for ``solve_arcs``."""
        points = np.asarray(points, float).reshape(self.points.shape)
        x, x_prime = _arc_endpoints(points, self.lift)
        return self.arcs.predict_momentum(x, x_prime)

    def row(self, k: int) -> ConfigurationEval:
        """Evaluation of the k-th configuration alone."""
        m = self.m
        part = slice(k * m, (k + 1) * m)
        a = self.arcs
        arcs = ArcSolution(
            x=a.x[part], x_prime=a.x_prime[part], tau0=a.tau0[part], momentum=a.momentum[part],
            value=a.value[part], d_x=a.d_x[part], d_xp=a.d_xp[part], d_xx=a.d_xx[part],
            d_xpxp=a.d_xpxp[part], d_xxp=a.d_xxp[part], batch=_slice_batch(a.batch, part),
        )
        return ConfigurationEval(
            points=self.points[k : k + 1], lift=self.lift, value=self.value[k : k + 1],
            d_x=self.d_x[k : k + 1], d_xp=self.d_xp[k : k + 1], d_xx=self.d_xx[k : k + 1],
            d_xpxp=self.d_xpxp[k : k + 1], d_xxp=self.d_xxp[k : k + 1],
            momentum=self.momentum[k : k + 1], duration=self.duration[k : k + 1],
            stm=self.stm[k : k + 1], arcs=arcs,
        )


def _slice_batch(batch: ArcBatch, part: slice) -> ArcBatch:
    def cut(a: NDArray | None) -> NDArray | None:
        return None if a is None else a[part]

    return ArcBatch(
        start=batch.start[part], end=batch.end[part], stm=batch.stm[part],
        action=batch.action[part], duration=batch.duration[part],
        x1_min=batch.x1_min[part], x1_max=batch.x1_max[part], min_speed=batch.min_speed[part],
        taus=cut(batch.taus), samples=cut(batch.samples), rates=cut(batch.rates),
    )


def _arc_endpoints(points: NDArray, lift: int) -> tuple[NDArray, NDArray]:
    closing = points[:, :1] + TWO_PI * lift
    return points.ravel(), np.concatenate([points[:, 1:], closing], axis=1).ravel()


def evaluate_points(
    rs: ReducedSystem,
    points: ArrayLike,
    lift: int = 0,
    guess: ArrayLike | None = None,
    record: bool = False,
) -> ConfigurationEval:
    """Solve every sub-arc of n configurations given as an (n, m) array."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n, m = points.shape
    if m < 3:
        raise ValueError(f"m must be at least 3, got {m}")
    h = TWO_PI / m
    x, x_prime = _arc_endpoints(points, lift)
    tau0 = np.tile(h * np.arange(m), n)
    arcs = solve_arcs(rs, x, x_prime, tau0, h, guess=guess, record=record)
    shape = (n, m)
    return ConfigurationEval(
        points=points,
        lift=lift,
        value=arcs.value.reshape(shape),
        d_x=arcs.d_x.reshape(shape),
        d_xp=arcs.d_xp.reshape(shape),
        d_xx=arcs.d_xx.reshape(shape),
        d_xpxp=arcs.d_xpxp.reshape(shape),
        d_xxp=arcs.d_xxp.reshape(shape),
        momentum=arcs.momentum.reshape(shape),
        duration=arcs.duration.reshape(shape),
        stm=arcs.batch.stm.reshape(n, m, 2, 2),
        arcs=arcs,
    )


def evaluate(
    cfg: Configuration, rs: ReducedSystem, record: bool = False
) -> ConfigurationEval:
    """Evaluate one configuration, warm-started from its stored momenta.

    Raises:
        ValueError: the configuration belongs to a different energy level.
    """
    if abs(cfg.energy - rs.energy) > 1e-12 * max(1.0, abs(rs.energy)):
        raise ValueError(f"configuration at E={cfg.energy} evaluated on E={rs.energy}")
    return evaluate_points(rs, cfg.points[None, :], cfg.lift, guess=cfg.momenta, record=record)


def total_action(cfg: Configuration, rs: ReducedSystem) -> float:
    """Sum of the sub-arc actions F_i(x_i, x_{i+1}, E)."""
    return float(evaluate(cfg, rs).total_action[0])


def el_residual(cfg: Configuration, rs: ReducedSystem) -> NDArray:
    """Discrete Euler-Lagrange residual at each node."""
    return evaluate(cfg, rs).residual[0]
