"""Monte-Carlo estimate of how often a random Fourier perturbation is nondegenerate.

Each sample draws (A1, B1, A2, B2) uniformly from [1, 2]^4, adds eps times the
Fourier potential to the base model, and runs the global structure over the
energy range. A sample passes when every global minimiser at every grid energy
has lambda0 / lambda1 at or above the threshold. Each sample keeps its margin,
so the pass fraction can be re-evaluated at any threshold.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from orbits.config import ContinuationConfig, SolverConfig
from orbits.continuation.structure import global_structure
from orbits.engine.executor import run_parallel
from orbits.errors import OrbitsError
from orbits.model.spec import ModelSpec
from orbits.perturbation.kernel import FourierPerturbation
from orbits.reduction.system import ReducedFamily

logger = logging.getLogger(__name__)


@dataclass
class SampleOutcome:
    index: int
    perturbation: FourierPerturbation
    margin: float                   # NaN when the structure run failed
    n_crossings: int = 0
    error: str | None = None

    def passes(self, threshold: float) -> bool:
        return self.error is None and math.isfinite(self.margin) and self.margin >= threshold

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "params": self.perturbation.parameters,
            "margin": self.margin if math.isfinite(self.margin) else None,
            "n_crossings": self.n_crossings,
            "error": self.error,
        }


def wilson_interval(passes: int, n: int, alpha: float = 0.05) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    z = float(norm.ppf(1.0 - alpha / 2.0))
    p = passes / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class MonteCarloReport:
    seed: int
    epsilon: float
    threshold: float
    E_range: tuple[float, float]
    alpha: float = 0.05
    outcomes: list[SampleOutcome] = field(default_factory=list)

    @property
    def n_samples(self) -> int:
        return len(self.outcomes)

    def fraction_at(self, threshold: float) -> float:
        if not self.outcomes:
            return 0.0
        return sum(o.passes(threshold) for o in self.outcomes) / len(self.outcomes)

    @property
    def fraction(self) -> float:
        return self.fraction_at(self.threshold)

    @property
    def ci(self) -> tuple[float, float]:
        passes = sum(o.passes(self.threshold) for o in self.outcomes)
        return wilson_interval(passes, self.n_samples, self.alpha)

    @property
    def failures(self) -> list[SampleOutcome]:
        return [o for o in self.outcomes if not o.passes(self.threshold)]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "epsilon": self.epsilon,
            "threshold": self.threshold,
            "E_range": list(self.E_range),
            "n_samples": self.n_samples,
            "fraction": self.fraction,
            "ci": list(self.ci),
            "alpha": self.alpha,
            "failures": [o.to_dict() for o in self.failures],
            "samples": [o.to_dict() for o in self.outcomes],
        }


def _sample_task(args: tuple) -> SampleOutcome:
    index, base_model, perturbation, E_range, config, settings = args
    model = base_model.with_perturbation(perturbation.as_potential, perturbation.epsilon)
    family = ReducedFamily(model=model, config=config)
    try:
        report = global_structure(
            family, E_range, settings.dE, settings, jobs=1, with_monodromy=False
        )
    except (OrbitsError, ValueError, ArithmeticError) as e:
        logger.warning(f"Sample {index} failed: {e}")
        return SampleOutcome(index, perturbation, float("nan"), error=f"{type(e).__name__}: {e}")
    margin = report.min_margin
    if any(flag.startswith("degenerate_global_minimum") for flag in report.flags):
        margin = min(margin, 0.0)
    logger.info(f"Sample {index}: margin {margin:.3e}, {len(report.crossings)} crossing(s)")
    return SampleOutcome(index, perturbation, margin, n_crossings=len(report.crossings))


def monte_carlo_nondegeneracy(
    base_model: ModelSpec,
    epsilon: float,
    n_samples: int,
    E_range: tuple[float, float],
    seed: int,
    config: SolverConfig | None = None,
    settings: ContinuationConfig | None = None,
    alpha: float = 0.05,
    min_samples: int = 100,
    jobs: int = 1,
) -> MonteCarloReport:
    """Sample perturbations on [1, 2]^4 and record each one's nondegeneracy margin.

    Raises:
        ValueError: n_samples below min_samples, or a non-positive epsilon.
    """
    if n_samples < max(1, min_samples):
        raise ValueError(f"n_samples must be >= {max(1, min_samples)}, got {n_samples}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    config = config or SolverConfig()
    settings = settings or ContinuationConfig()
    rng = np.random.default_rng(seed)
    perturbations = [FourierPerturbation.sample(rng, epsilon) for _ in range(n_samples)]
    tasks = [
        (k, base_model, p, tuple(E_range), config, settings)
        for k, p in enumerate(perturbations)
    ]
    logger.info(f"Running {n_samples} perturbation samples (seed {seed}, eps {epsilon})")
    outcomes = run_parallel(_sample_task, tasks, jobs)
    report = MonteCarloReport(
        seed=seed,
        epsilon=epsilon,
        threshold=config.tolerances.degeneracy_threshold,
        E_range=(float(E_range[0]), float(E_range[1])),
        alpha=alpha,
        outcomes=list(outcomes),
    )
    logger.info(f"Nondegenerate fraction {report.fraction:.4f}, CI {report.ci}")
    return report
