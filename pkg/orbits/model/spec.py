"""Model specification: a Fourier-parametrised Tonelli Lagrangian on T^2.

    L(x, v) = 1/2 <A(x) v, v> - U(x) - eps P(x)

``A`` is symmetric with entries a11, a12, a22 given as Fourier tables. Models
load from and dump to the JSON document described in FORMATS.md; the document
schema is enforced with pydantic.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from orbits.errors import ModelValidationError
from orbits.model.fourier import FourierStack, FourierTable

logger = logging.getLogger(__name__)

KINETIC_ENTRIES = ("a11", "a12", "a22")

# Stack output -> row-major 2x2 entry
_MATRIX_INDEX = [0, 1, 1, 2]

Row = tuple[int, int, float, float]


# ─── JSON document ───────────────────────────────────────────────


def _identity_rows() -> list[Row]:
    return [(0, 0, 1.0, 0.0)]


class KineticDocument(BaseModel):
    """Fourier tables of the kinetic matrix entries."""

    model_config = ConfigDict(extra="forbid")

    a11: list[Row] = Field(default_factory=_identity_rows)
    a12: list[Row] = Field(default_factory=list)
    a22: list[Row] = Field(default_factory=_identity_rows)


class ModelDocument(BaseModel):
    """On-disk model file."""

    model_config = ConfigDict(extra="forbid")

    kinetic: KineticDocument = Field(default_factory=KineticDocument)
    potential: list[Row] = Field(default_factory=list)
    perturbation: list[Row] = Field(default_factory=list)
    epsilon: float = Field(0.0, ge=0.0)
    cutoff: int = Field(8, ge=1)

    @model_validator(mode="after")
    def _modes_within_cutoff(self) -> ModelDocument:
        tables = {
            **{f"kinetic.{k}": getattr(self.kinetic, k) for k in KINETIC_ENTRIES},
            "potential": self.potential,
            "perturbation": self.perturbation,
        }
        for name, rows in tables.items():
            for k1, k2, _, _ in rows:
                if max(abs(k1), abs(k2)) > self.cutoff:
                    raise ValueError(
                        f"{name}: mode ({k1}, {k2}) exceeds cutoff {self.cutoff}"
                    )
        return self


# ─── Evaluated fields ────────────────────────────────────────────


@dataclass
class ModelFields:
    """Kinetic matrix and total potential with derivatives at a batch of points."""

    A: NDArray       # (..., 2, 2)
    dA: NDArray      # (..., 2, 2, 2)     [a, b, j] = d_j A_ab
    d2A: NDArray     # (..., 2, 2, 2, 2)  [a, b, j, l]
    V: NDArray       # (...,)
    dV: NDArray      # (..., 2)
    d2V: NDArray     # (..., 2, 2)


@dataclass
class ValidationReport:
    """Outcome of the positive-definiteness scan."""

    m_L: float
    worst_point: tuple[float, float]
    grid: int
    potential_range: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "m_L": self.m_L,
            "worst_point": list(self.worst_point),
            "grid": self.grid,
            "potential_range": list(self.potential_range),
        }


# ─── Model ───────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Immutable Fourier model; safe to share between threads and processes."""

    kinetic: tuple[FourierTable, FourierTable, FourierTable]
    potential: FourierTable = field(default_factory=FourierTable.zero)
    perturbation: FourierTable = field(default_factory=FourierTable.zero)
    epsilon: float = 0.0
    cutoff: int = 8

    def __post_init__(self) -> None:
        if len(self.kinetic) != 3:
            raise ModelValidationError("kinetic needs the three entries a11, a12, a22")
        if self.cutoff < 1:
            raise ModelValidationError(f"cutoff must be >= 1, got {self.cutoff}")
        if self.epsilon < 0:
            raise ModelValidationError(f"epsilon must be >= 0, got {self.epsilon}")
        for table in (*self.kinetic, self.potential, self.perturbation):
            if table.cutoff > self.cutoff:
                raise ModelValidationError(
                    f"Fourier mode of order {table.cutoff} exceeds cutoff {self.cutoff}"
                )
            if not (np.all(np.isfinite(table.cos)) and np.all(np.isfinite(table.sin))):
                raise ModelValidationError("Fourier coefficients must be finite reals")

    @cached_property
    def _stack(self) -> FourierStack:
        return FourierStack([*self.kinetic, self.potential, self.perturbation])

    # ─── Evaluation ──────────────────────────────────────────────

    def fields(self, x: ArrayLike) -> ModelFields:
        """Evaluate A and V = U + eps P with first and second derivatives."""
        x = np.asarray(x, dtype=float)
        batch = x.shape[:-1]
        value, grad, hess = self._stack.evaluate(x)
        return ModelFields(
            A=value[..., _MATRIX_INDEX].reshape(*batch, 2, 2),
            dA=grad[..., _MATRIX_INDEX, :].reshape(*batch, 2, 2, 2),
            d2A=hess[..., _MATRIX_INDEX, :, :].reshape(*batch, 2, 2, 2, 2),
            V=value[..., 3] + self.epsilon * value[..., 4],
            dV=grad[..., 3, :] + self.epsilon * grad[..., 4, :],
            d2V=hess[..., 3, :, :] + self.epsilon * hess[..., 4, :, :],
        )

    def kinetic_matrix(self, x: ArrayLike) -> NDArray:
        x = np.asarray(x, dtype=float)
        value = self._stack.value(x)
        return value[..., _MATRIX_INDEX].reshape(*x.shape[:-1], 2, 2)

    def potential_energy(self, x: ArrayLike) -> NDArray:
        """Total potential U + eps P."""
        value = self._stack.value(x)
        return value[..., 3] + self.epsilon * value[..., 4]

    def validate(self, grid: int = 64) -> ValidationReport:
        """Scan a ``grid x grid`` lattice for positive definiteness of A.

        Raises:
            ModelValidationError: naming the worst grid point when A is not SPD.
        """
        axis = 2 * np.pi * np.arange(grid) / grid
        points = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
        A = self.kinetic_matrix(points)
        if not np.allclose(A, np.swapaxes(A, -1, -2)):
            raise ModelValidationError("kinetic matrix is not symmetric")
        smallest = np.linalg.eigvalsh(A)[:, 0]
        worst = int(np.argmin(smallest))
        m_L = float(smallest[worst])
        point = (float(points[worst, 0]), float(points[worst, 1]))
        if not m_L > 0:
            raise ModelValidationError(
                f"kinetic matrix not positive definite at grid point {point}",
                point=list(point),
                eigenvalue=m_L,
            )
        V = self.potential_energy(points)
        logger.debug(f"Validated model on {grid}x{grid} grid: m_L={m_L:.6g}")
        return ValidationReport(
            m_L=m_L,
            worst_point=point,
            grid=grid,
            potential_range=(float(V.min()), float(V.max())),
        )

    # ─── Derived models ──────────────────────────────────────────

    def with_perturbation(self, perturbation: FourierTable, epsilon: float) -> ModelSpec:
        """Same kinetic part and U, new perturbation term eps P."""
        return ModelSpec(
            kinetic=self.kinetic,
            potential=self.potential,
            perturbation=perturbation,
            epsilon=epsilon,
            cutoff=max(self.cutoff, perturbation.cutoff),
        )

    def shifted(self, c: float) -> ModelSpec:
        """Add the constant c to U."""
        return ModelSpec(
            kinetic=self.kinetic,
            potential=self.potential + FourierTable.constant(c),
            perturbation=self.perturbation,
            epsilon=self.epsilon,
            cutoff=self.cutoff,
        )

    # ─── Serialization ───────────────────────────────────────────

    @classmethod
    def from_document(cls, data: dict) -> ModelSpec:
        """Build a model from a parsed JSON document."""
        try:
            doc = ModelDocument.model_validate(data)
        except ValidationError as e:
            messages = [
                f"{'.'.join(str(p) for p in err['loc']) or 'model'}: {err['msg']}"
                for err in e.errors()
            ]
            raise ModelValidationError("invalid model document", errors=messages) from e
        return cls(
            kinetic=tuple(
                FourierTable.from_rows(getattr(doc.kinetic, k)) for k in KINETIC_ENTRIES
            ),
            potential=FourierTable.from_rows(doc.potential),
            perturbation=FourierTable.from_rows(doc.perturbation),
            epsilon=doc.epsilon,
            cutoff=doc.cutoff,
        )

    def to_document(self) -> dict:
        return {
            "kinetic": {k: t.to_rows() for k, t in zip(KINETIC_ENTRIES, self.kinetic, strict=True)},
            "potential": self.potential.to_rows(),
            "perturbation": self.perturbation.to_rows(),
            "epsilon": self.epsilon,
            "cutoff": self.cutoff,
        }

    @classmethod
    def load(cls, path: Path) -> ModelSpec:
        """Read a model file.

        Raises:
            OSError: unreadable file.
            ModelValidationError: malformed JSON or document.
        """
        with open(path) as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise ModelValidationError(f"invalid JSON in {path}: {e}") from e
        if not isinstance(data, dict):
            raise ModelValidationError("model document must be a JSON object")
        return cls.from_document(data)

    def dump(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            json.dump(self.to_document(), f, indent=2)
