"""Twist maps generated by the sub-arc actions."""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

from orbits.reduction.flow import propagate
from orbits.reduction.system import ReducedSystem

TWO_PI = 2.0 * np.pi


def twist_map(rs: ReducedSystem, i: int, x: float, y: float, m: int) -> tuple[float, float]:
    """Advance (x, y) by the reduced flow over [2 pi i / m, 2 pi (i + 1) / m]."""
    h = TWO_PI / m
    batch = propagate(rs, x, y, h * i, h, rs.discretization.substeps, variational=False)
    return float(batch.end[0, 0]), float(batch.end[0, 2])


def twist_jacobian(rs: ReducedSystem, i: int, x: float, y: float, m: int) -> NDArray:
    """Linearisation of ``twist_map`` from the variational equations."""
    h = TWO_PI / m
    return propagate(rs, x, y, h * i, h, rs.discretization.substeps).stm[0]


def period_map(rs: ReducedSystem, x: float, y: float, m: int) -> tuple[float, float]:
    """Composition of the m twist maps: the time-2pi map of the reduced flow."""
    for i in range(m):
        x, y = twist_map(rs, i, x, y, m)
    return x, y
