"""The cyclic tridiagonal Jacobi matrix of the total action.

    A_i = d2F_{i-1}/dx'2 + d2F_i/dx2,   B_i = d2F_i/dx dx'

with the corner entries B_{m-1} closing the cycle. J_{m-1} is J with the
row and column of x_0 removed; it drives the inner solve at fixed x_0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import LinAlgError, cho_factor, eigh

from orbits.discrete.configuration import Configuration, ConfigurationEval, evaluate
from orbits.errors import EigenFailure, NotCritical
from orbits.reduction.system import ReducedSystem

logger = logging.getLogger(__name__)


def is_positive_definite(matrix: NDArray) -> bool:
    """Dense Cholesky test."""
    try:
        cho_factor(matrix)
    except LinAlgError:
        return False
    return True


@dataclass
class JacobiMatrix:
    """J with its spectrum and ground eigenvector."""

    diag: NDArray           # A_0 .. A_{m-1}
    offdiag: NDArray        # B_0 .. B_{m-2}
    corner: float           # B_{m-1}
    eigenvalues: NDArray    # ascending
    ground_vector: NDArray  # xi_0 with xi_0[0] = 1 when possible

    @property
    def m(self) -> int:
        return self.diag.size

    @property
    def lambda0(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda1(self) -> float:
        return float(self.eigenvalues[1])

    @property
    def spectrum_gap(self) -> float:
        return self.lambda1 - self.lambda0

    @property
    def twist(self) -> bool:
        return bool(np.all(self.offdiag < 0) and self.corner < 0)

    def dense(self) -> NDArray:
        m = self.m
        J = np.diag(self.diag)
        idx = np.arange(m - 1)
        J[idx, idx + 1] = self.offdiag
        J[idx + 1, idx] = self.offdiag
        J[0, m - 1] = J[m - 1, 0] = self.corner
        return J

    def interior(self) -> NDArray:
        """J_{m-1}: J without the x_0 row and column."""
        return self.dense()[1:, 1:]

    @property
    def positive_definite(self) -> bool:
        return is_positive_definite(self.dense())

    @property
    def interior_positive_definite(self) -> bool:
        return is_positive_definite(self.interior())

    def schur_complement(self) -> float:
        """d2F/dx0^2 of the one-variable action: J_00 - J_0r J_{m-1}^{-1} J_r0."""
        J = self.dense()
        coupling = J[0, 1:]
        return float(J[0, 0] - coupling @ np.linalg.solve(J[1:, 1:], coupling))

    def ground_positive(self) -> bool:
        """Sign-constancy of xi_0."""
        return bool(np.all(self.ground_vector > 0))

    def eigen_residual(self) -> float:
        """max |J xi_0 - lambda0 xi_0|."""
        xi = self.ground_vector
        return float(np.max(np.abs(self.dense() @ xi - self.lambda0 * xi)))

    def to_dict(self) -> dict:
        return {
            "diag": self.diag.tolist(),
            "offdiag": self.offdiag.tolist(),
            "corner": self.corner,
            "eigenvalues": self.eigenvalues.tolist(),
            "ground_vector": self.ground_vector.tolist(),
        }


def jacobi_from_eval(evaluation: ConfigurationEval) -> JacobiMatrix:
    """Assemble J of the first configuration in an evaluation.

    Raises:
        EigenFailure: the dense eigensolver broke down.
    """
    J = evaluation.jacobi_dense()[0]
    try:
        eigenvalues, vectors = eigh(J)
    except (LinAlgError, ValueError) as e:
        raise EigenFailure(f"eigensolver failed on the Jacobi matrix: {e}") from e
    if not np.all(np.isfinite(eigenvalues)):
        raise EigenFailure("non-finite Jacobi spectrum")
    xi = vectors[:, 0]
    if abs(xi[0]) > 1e-12:
        xi = xi / xi[0]
    else:
        xi = xi * np.sign(xi.sum() or 1.0)
    m = J.shape[0]
    return JacobiMatrix(
        diag=np.diag(J).copy(),
        offdiag=np.array([J[i, i + 1] for i in range(m - 1)]),
        corner=float(J[0, m - 1]),
        eigenvalues=eigenvalues,
        ground_vector=xi,
    )


def assemble_jacobi(
    cfg: Configuration,
    rs: ReducedSystem,
    exploratory: bool = False,
    evaluation: ConfigurationEval | None = None,
) -> JacobiMatrix:
    """Jacobi matrix at a critical (or, with ``exploratory``, any) configuration.

    Raises:
        NotCritical: residual above tolerance and not exploratory.
        EigenFailure: eigensolver breakdown.
    """
    evaluation = evaluation if evaluation is not None else evaluate(cfg, rs)
    residual = float(np.max(np.abs(evaluation.residual[0])))
    if not exploratory and residual > rs.tolerances.residual:
        raise NotCritical(
            f"configuration residual {residual:.3e} above {rs.tolerances.residual:.1e}",
            residual=residual,
        )
    jacobi = jacobi_from_eval(evaluation)
    logger.debug(f"Jacobi spectrum: lambda0={jacobi.lambda0:.6e}, lambda1={jacobi.lambda1:.6e}")
    return jacobi
