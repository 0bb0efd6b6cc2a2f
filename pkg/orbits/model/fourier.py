"""Truncated Fourier series on the two-torus.

A table is a list of rows ``[k1, k2, cos_coeff, sin_coeff]`` describing
``sum c cos(k.x) + s sin(k.x)``. ``FourierStack`` evaluates several tables at
once, returning values, gradients and Hessians in closed form for batches of
points of shape ``(..., 2)``.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray


@dataclass(frozen=True, eq=False)
class FourierTable:
    """One real Fourier series on T^2."""

    modes: NDArray[np.int64]     # (n, 2)
    cos: NDArray[np.float64]     # (n,)
    sin: NDArray[np.float64]     # (n,)

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[float]]) -> FourierTable:
        """Build a table from ``[k1, k2, c, s]`` rows."""
        data = np.asarray(list(rows), dtype=float).reshape(-1, 4)
        modes = data[:, :2]
        if not np.all(modes == np.round(modes)):
            raise ValueError("Fourier modes must be integers")
        return cls(modes=modes.astype(np.int64), cos=data[:, 2].copy(), sin=data[:, 3].copy())

    @classmethod
    def zero(cls) -> FourierTable:
        return cls.from_rows([])

    @classmethod
    def constant(cls, value: float) -> FourierTable:
        return cls.from_rows([[0, 0, value, 0.0]])

    def to_rows(self) -> list[list[float]]:
        return [
            [int(k[0]), int(k[1]), float(c), float(s)]
            for k, c, s in zip(self.modes, self.cos, self.sin, strict=True)
        ]

    @property
    def cutoff(self) -> int:
        """Largest |k_j| appearing in the table."""
        return int(np.abs(self.modes).max()) if len(self.modes) else 0

    def scaled(self, factor: float) -> FourierTable:
        return FourierTable(self.modes, self.cos * factor, self.sin * factor)

    def __add__(self, other: FourierTable) -> FourierTable:
        return FourierTable(
            np.concatenate([self.modes, other.modes]),
            np.concatenate([self.cos, other.cos]),
            np.concatenate([self.sin, other.sin]),
        )

    def __call__(self, x: ArrayLike) -> NDArray[np.float64]:
        """Evaluate at points of shape ``(..., 2)``."""
        return FourierStack([self]).value(x)[..., 0]


class FourierStack:
    """Several tables evaluated together.

    Terms of all tables are concatenated; a coefficient matrix of shape
    ``(n_terms, n_outputs)`` routes each term to its output. Derivative weights
    ``c k_j`` and ``c k_j k_l`` are precomputed.
    """

    def __init__(self, tables: Sequence[FourierTable]) -> None:
        self.n_outputs = len(tables)
        counts = [len(t.cos) for t in tables]
        n = sum(counts)
        self._modes = np.zeros((n, 2)) if n == 0 else np.concatenate(
            [t.modes for t in tables]
        ).astype(float)
        cos = np.zeros((n, self.n_outputs))
        sin = np.zeros((n, self.n_outputs))
        start = 0
        for q, table in enumerate(tables):
            stop = start + counts[q]
            cos[start:stop, q] = table.cos
            sin[start:stop, q] = table.sin
            start = stop
        k = self._modes
        q = self.n_outputs
        kk = k[:, :, None] * k[:, None, :]
        self._cos = cos
        self._sin = sin
        self._cos_k = (cos[:, :, None] * k[:, None, :]).reshape(n, 2 * q)
        self._sin_k = (sin[:, :, None] * k[:, None, :]).reshape(n, 2 * q)
        self._cos_kk = (cos[:, :, None, None] * kk[:, None, :, :]).reshape(n, 4 * q)
        self._sin_kk = (sin[:, :, None, None] * kk[:, None, :, :]).reshape(n, 4 * q)

    def _phases(self, x: ArrayLike) -> tuple[NDArray, NDArray]:
        theta = np.asarray(x, dtype=float) @ self._modes.T
        return np.cos(theta), np.sin(theta)

    def value(self, x: ArrayLike) -> NDArray[np.float64]:
        """Values, shape ``(..., q)``."""
        c, s = self._phases(x)
        return c @ self._cos + s @ self._sin

    def evaluate(self, x: ArrayLike) -> tuple[NDArray, NDArray, NDArray]:
        """Values ``(..., q)``, gradients ``(..., q, 2)``, Hessians ``(..., q, 2, 2)``."""
        c, s = self._phases(x)
        batch = c.shape[:-1]
        q = self.n_outputs
        value = c @ self._cos + s @ self._sin
        grad = (c @ self._sin_k - s @ self._cos_k).reshape(*batch, q, 2)
        hess = -(c @ self._cos_kk + s @ self._sin_kk).reshape(*batch, q, 2, 2)
        return value, grad, hess
