"""Batched reduced flow in the time variable tau = sigma x2.

The reduced dynamics is the Hamiltonian vector field rescaled by
1 / (sigma dH/dy2), so dx2/dtau = sigma exactly. Along with the state the
integrator carries

- the on-shell tangent columns for (dx1, dy1), giving the 2x2 reduced STM,
- the action integral dS/dtau = <y, H_y> / (sigma H_y2) = Lbar,
- the physical time dt/dtau = 1 / (sigma H_y2) = -G.

Every arc of a batch advances together with one vectorised RK4 step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from orbits.model.dynamics import phase_geometry
from orbits.reduction.system import ReducedSystem


@dataclass
class ArcBatch:
    """Result of integrating N arcs over tau-intervals of length h."""

    start: NDArray           # (N, 4) phase states
    end: NDArray             # (N, 4)
    stm: NDArray             # (N, 2, 2) d(x1', y1') / d(x1, y1)
    action: NDArray          # (N,)
    duration: NDArray        # (N,) physical time
    x1_min: NDArray          # (N,)
    x1_max: NDArray          # (N,)
    min_speed: NDArray       # (N,) min of sigma dH/dy2 along the arc
    taus: NDArray | None = None       # (N, s + 1)
    samples: NDArray | None = None    # (N, s + 1, 4)
    rates: NDArray | None = None      # (N, s + 1) dt/dtau

    @property
    def size(self) -> int:
        return len(self.action)


def _rhs(
    rs: ReducedSystem, z: NDArray, psi: NDArray | None
) -> tuple[NDArray, NDArray | None, NDArray, NDArray, NDArray]:
    sigma = rs.branch_orientation
    geo = phase_geometry(rs.model, z, second_order=psi is not None)
    speed = sigma * geo.v[..., 1]
    rate = 1.0 / speed
    field = geo.vector_field
    dz = field * rate[..., None]
    ds = np.einsum("...a,...a->...", z[..., 2:], geo.v) * rate
    dpsi = None
    if psi is not None:
        grad_h2 = geo.hess[..., 3, :]
        dZ = rate[..., None, None] * geo.jacobian - sigma * (rate**2)[..., None, None] * (
            field[..., :, None] * grad_h2[..., None, :]
        )
        dZ[..., 1, :] = 0.0
        dpsi = dZ @ psi
    return dz, dpsi, ds, rate, speed


def propagate(
    rs: ReducedSystem,
    x1: ArrayLike,
    y1: ArrayLike,
    tau0: ArrayLike,
    h: ArrayLike,
    substeps: int,
    record: bool = False,
    variational: bool = True,
) -> ArcBatch:
    """Integrate the reduced flow from (x1, y1) at tau0 over [tau0, tau0 + h]."""
    x1, y1, tau0 = np.broadcast_arrays(
        np.atleast_1d(np.asarray(x1, float)),
        np.atleast_1d(np.asarray(y1, float)),
        np.atleast_1d(np.asarray(tau0, float)),
    )
    n = x1.shape[0]
    dtau = np.broadcast_to(np.asarray(h, float), (n,)) / substeps

    z = rs.shell_state(x1, y1, tau0)
    start = z.copy()
    psi = None
    if variational:
        geo = phase_geometry(rs.model, z, second_order=False)
        h2 = geo.grad[:, 3]
        psi = np.zeros((n, 4, 2))
        psi[:, 0, 0] = 1.0
        psi[:, 3, 0] = -geo.grad[:, 0] / h2
        psi[:, 2, 1] = 1.0
        psi[:, 3, 1] = -geo.grad[:, 2] / h2

    action = np.zeros(n)
    duration = np.zeros(n)
    x1_min = x1.copy()
    x1_max = x1.copy()
    min_speed = np.full(n, np.inf)
    if record:
        samples = np.empty((n, substeps + 1, 4))
        rates = np.empty((n, substeps + 1))
        samples[:, 0] = z

    d = dtau[:, None]
    d3 = dtau[:, None, None]

    def stage(frac: float, dz: NDArray, dpsi: NDArray | None):
        shifted = None if psi is None else psi + frac * d3 * dpsi
        return _rhs(rs, z + frac * d * dz, shifted)

    for k in range(substeps):
        k1, p1, s1, r1, v1 = _rhs(rs, z, psi)
        k2, p2, s2, r2, v2 = stage(0.5, k1, p1)
        k3, p3, s3, r3, v3 = stage(0.5, k2, p2)
        k4, p4, s4, r4, v4 = stage(1.0, k3, p3)
        z = z + d / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if psi is not None:
            psi = psi + d3 / 6.0 * (p1 + 2 * p2 + 2 * p3 + p4)
        action += dtau / 6.0 * (s1 + 2 * s2 + 2 * s3 + s4)
        duration += dtau / 6.0 * (r1 + 2 * r2 + 2 * r3 + r4)
        min_speed = np.minimum.reduce([min_speed, v1, v2, v3, v4])
        x1_min = np.minimum(x1_min, z[:, 0])
        x1_max = np.maximum(x1_max, z[:, 0])
        if record:
            samples[:, k + 1] = z
            rates[:, k] = r1
    if record:
        rates[:, substeps] = _rhs(rs, z, None)[3]

    stm = psi[:, [0, 2], :] if psi is not None else np.full((n, 2, 2), np.nan)
    return ArcBatch(
        start=start,
        end=z,
        stm=stm,
        action=action,
        duration=duration,
        x1_min=x1_min,
        x1_max=x1_max,
        min_speed=min_speed,
        taus=tau0[:, None] + dtau[:, None] * np.arange(substeps + 1) if record else None,
        samples=samples if record else None,
        rates=rates if record else None,
    )
