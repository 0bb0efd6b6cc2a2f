"""One-variable action F(x0, E) through the inner solve at fixed x0.

For fixed x0 the interior nodes solve dF/dx_i = 0 (i = 1..m-1) by Newton with
J_{m-1} as system matrix. Many base points are solved together in one batch;
a configuration whose sub-arcs fail is isolated by splitting the batch, so
one bad base point never poisons the others.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import minimize

from orbits.discrete.configuration import Configuration, ConfigurationEval, evaluate_points
from orbits.discrete.jacobi import is_positive_definite
from orbits.errors import NewtonDivergence, OrbitsError
from orbits.reduction.system import ReducedSystem

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi

Solved = tuple[NDArray, ConfigurationEval]


# ─── Batched evaluation and Newton ───────────────────────────────


def evaluate_rows(
    rs: ReducedSystem,
    points: NDArray,
    lift: int,
    guesses: Sequence[NDArray | None] | None = None,
) -> list[ConfigurationEval | None]:
    """Evaluate n configurations; rows whose sub-arcs fail come back as None."""
    n = points.shape[0]
    if n == 0:
        return []
    guess = None
    if guesses is not None and all(g is not None for g in guesses):
        guess = np.concatenate([np.asarray(g, float) for g in guesses])
    try:
        batch = evaluate_points(rs, points, lift, guess=guess)
    except OrbitsError as e:
        if n == 1:
            logger.debug(f"Configuration at x0={points[0, 0]:.6f} failed: {e}")
            return [None]
        half = n // 2
        first = None if guesses is None else guesses[:half]
        second = None if guesses is None else guesses[half:]
        return evaluate_rows(rs, points[:half], lift, first) + evaluate_rows(
            rs, points[half:], lift, second
        )
    return [batch.row(k) for k in range(n)]


def _residual_norm(evaluation: ConfigurationEval, interior: bool) -> float:
    r = evaluation.residual[0]
    return float(np.max(np.abs(r[1:] if interior else r)))


def _newton_step(evaluation: ConfigurationEval, interior: bool) -> NDArray | None:
    """Newton direction; None when J_{m-1} is not positive definite (interior mode)."""
    J = evaluation.jacobi_dense()[0]
    r = evaluation.residual[0]
    if interior:
        Jr = J[1:, 1:]
        if not is_positive_definite(Jr):
            return None
        step = np.zeros_like(r)
        step[1:] = -np.linalg.solve(Jr, r[1:])
        return step
    step, *_ = np.linalg.lstsq(J, -r, rcond=1e-12)
    return step


def newton_rows(
    rs: ReducedSystem,
    points: ArrayLike,
    lift: int = 0,
    interior: bool = True,
    guesses: Sequence[NDArray | None] | None = None,
) -> list[Solved | None]:
    """Damped Newton on the discrete E-L system for a batch of configurations.

    With ``interior`` the first node stays fixed and only dF/dx_i, i >= 1, is
    driven to zero. Rows that diverge come back as None.
    """
    points = np.array(np.atleast_2d(points), dtype=float)
    n = points.shape[0]
    tol = rs.tolerances.residual
    max_iter = rs.discretization.newton_iterations
    evals = evaluate_rows(rs, points, lift, guesses)
    results: list[Solved | None] = [None] * n
    active = [k for k in range(n) if evals[k] is not None]

    for iteration in range(max_iter):
        norms = {k: _residual_norm(evals[k], interior) for k in active}
        for k in [k for k in active if norms[k] <= tol]:
            results[k] = (points[k].copy(), evals[k])
        active = [k for k in active if norms[k] > tol]
        if not active:
            break

        steps: dict[int, NDArray] = {}
        for k in active:
            step = _newton_step(evals[k], interior)
            if step is None or not np.all(np.isfinite(step)):
                logger.debug(f"Row {k}: J_(m-1) not positive definite, leaving window")
            else:
                steps[k] = step
        pending = list(steps)
        alpha = dict.fromkeys(pending, 1.0)
        accepted: list[int] = []
        for _ in range(8):
            if not pending:
                break
            trial = np.stack([points[k] + alpha[k] * steps[k] for k in pending])
            guesses_trial = [
                evals[k].predict_momentum(trial[j][None, :]) for j, k in enumerate(pending)
            ]
            trial_evals = evaluate_rows(rs, trial, lift, guesses_trial)
            still = []
            for j, k in enumerate(pending):
                new = trial_evals[j]
                target = norms[k] * (1 - 1e-4 * alpha[k]) + tol
                if new is not None and _residual_norm(new, interior) < target:
                    points[k] = trial[j]
                    evals[k] = new
                    accepted.append(k)
                else:
                    alpha[k] *= 0.5
                    still.append(k)
            pending = still
        active = accepted
        logger.debug(
            f"Newton iteration {iteration}: {len(active)} row(s) active, "
            f"max residual {max(norms.values()):.3e}"
        )
    else:
        for k in active:
            if _residual_norm(evals[k], interior) <= tol:
                results[k] = (points[k].copy(), evals[k])
    return results


def _as_configuration(solved: Solved, rs: ReducedSystem, lift: int) -> Configuration:
    points, evaluation = solved
    return Configuration(
        points=points, energy=rs.energy, lift=lift, momenta=evaluation.momentum[0].copy()
    )


# ─── Inner solve ─────────────────────────────────────────────────


def inner_solve(
    rs: ReducedSystem, x0: float, init: Configuration | None = None
) -> Configuration:
    """Interior nodes solving dF/dx_i = 0 (i >= 1) with x_0 fixed.

    Raises:
        NewtonDivergence: outside a smooth window of the profile.
    """
    m = init.m if init is not None else rs.discretization.m_initial
    lift = init.lift if init is not None else 0
    points = np.full(m, float(x0)) if init is None else init.points.copy()
    points[0] = x0
    guesses = None if init is None or init.momenta is None else [init.momenta]
    solved = newton_rows(rs, points[None, :], lift, interior=True, guesses=guesses)[0]
    if solved is None:
        raise NewtonDivergence(f"inner solve diverged at x0={x0:.6f}", x0=float(x0))
    return _as_configuration(solved, rs, lift)


def minimize_interior(
    rs: ReducedSystem, x0: float, init: Configuration | None = None
) -> Configuration:
    """Fallback: bounded quasi-Newton minimisation over the interior nodes, then Newton."""
    m = init.m if init is not None else rs.discretization.m_initial
    lift = init.lift if init is not None else 0
    start = np.full(m - 1, float(x0)) if init is None else init.points[1:].copy()
    lo, hi = rs.strip

    def objective(interior_points: NDArray) -> tuple[float, NDArray]:
        points = np.concatenate([[x0], interior_points])
        try:
            evaluation = evaluate_points(rs, points[None, :], lift)
        except OrbitsError as e:
            raise NewtonDivergence(f"fallback minimisation left the admissible region: {e}") from e
        return float(evaluation.total_action[0]), evaluation.residual[0, 1:]

    result = minimize(
        objective, start, jac=True, method="L-BFGS-B", bounds=[(lo, hi)] * (m - 1)
    )
    logger.info(f"Fallback minimisation at x0={x0:.6f}: {result.message}")
    points = np.concatenate([[x0], result.x])
    return inner_solve(rs, x0, Configuration(points=points, energy=rs.energy, lift=lift))


def solve_base(rs: ReducedSystem, x0: float, init: Configuration | None = None) -> Configuration:
    """Inner solve with the minimisation fallback."""
    try:
        return inner_solve(rs, x0, init)
    except NewtonDivergence:
        logger.info(f"Inner Newton diverged at x0={x0:.6f}; falling back to minimisation")
        return minimize_interior(rs, x0, init)


def action_of_base(rs: ReducedSystem, x0: float) -> float:
    """F(x0, E): total action of the inner solution at x0."""
    cfg = solve_base(rs, x0)
    return float(evaluate_points(rs, cfg.points[None, :], cfg.lift, cfg.momenta).total_action[0])


# ─── Action profile ──────────────────────────────────────────────


@dataclass
class ActionProfile:
    """F(., E) sampled on a grid of base points."""

    E: float
    base_points: NDArray
    values: NDArray                       # NaN where the inner solve failed
    configurations: list[Configuration | None] = field(default_factory=list)
    window_ok: NDArray | None = None      # inner solve unique (J_{m-1} PD)
    smooth_windows: list[tuple[float, float]] = field(default_factory=list)

    @property
    def spacing(self) -> float:
        return float(self.base_points[1] - self.base_points[0])

    @property
    def oscillation(self) -> float:
        finite = self.values[np.isfinite(self.values)]
        return float(finite.max() - finite.min()) if finite.size else 0.0

    def local_minima(self) -> list[int]:
        """Cyclic local minima of the sampled profile among solved points."""
        v = self.values
        n = v.size
        found = []
        for k in range(n):
            if not np.isfinite(v[k]):
                continue
            left, right = v[(k - 1) % n], v[(k + 1) % n]
            if (not np.isfinite(left) or v[k] <= left) and (not np.isfinite(right) or v[k] < right):
                found.append(k)
        return found

    def to_rows(self) -> list[tuple[float, float]]:
        return [(float(x), float(f)) for x, f in zip(self.base_points, self.values)]


def _smooth_windows(profile: ActionProfile) -> list[tuple[float, float]]:
    """Maximal cyclic runs of solvable grid points around each local minimum."""
    ok = profile.window_ok
    n = ok.size
    h = profile.spacing
    windows = []
    for k in profile.local_minima():
        if not ok[k]:
            continue
        left = right = k
        steps = 0
        while ok[(left - 1) % n] and steps < n - 1:
            left -= 1
            steps += 1
        while ok[(right + 1) % n] and steps < n - 1:
            right += 1
            steps += 1
        start = float(profile.base_points[0])
        windows.append((start + left * h, start + right * h))
    return windows


def action_profile(
    rs: ReducedSystem, base_points: ArrayLike | None = None, m: int | None = None
) -> ActionProfile:
    """Batched inner solves over a grid of base points."""
    if base_points is None:
        n_grid = rs.discretization.base_grid
        base_points = TWO_PI * np.arange(n_grid) / n_grid
    base_points = np.asarray(base_points, dtype=float)
    m = m or rs.discretization.m_initial
    logger.info(f"Scanning {base_points.size} base points at E={rs.energy} with m={m}")

    starts = np.repeat(base_points[:, None], m, axis=1)
    solved = newton_rows(rs, starts, 0, interior=True)
    configurations: list[Configuration | None] = []
    values = np.full(base_points.size, np.nan)
    window_ok = np.zeros(base_points.size, dtype=bool)
    for k, item in enumerate(solved):
        if item is None:
            try:
                cfg = minimize_interior(rs, float(base_points[k]))
                item = newton_rows(rs, cfg.points[None, :], 0, True, [cfg.momenta])[0]
            except OrbitsError as e:
                logger.warning(f"Base point x0={base_points[k]:.6f} unsolved: {e}")
        if item is None:
            configurations.append(None)
            continue
        configurations.append(_as_configuration(item, rs, 0))
        values[k] = float(item[1].total_action[0])
        window_ok[k] = is_positive_definite(item[1].jacobi_dense()[0, 1:, 1:])

    profile = ActionProfile(
        E=rs.energy,
        base_points=base_points,
        values=values,
        configurations=configurations,
        window_ok=window_ok,
    )
    profile.smooth_windows = _smooth_windows(profile)
    return profile


def polish_configuration(cfg: Configuration, rs: ReducedSystem) -> Configuration:
    """Full Newton on all m nodes: the discrete E-L system dF/dx_i = 0 for every i.

    Raises:
        NewtonDivergence: the corrector failed to reach the residual tolerance.
    """
    guesses = None if cfg.momenta is None else [cfg.momenta]
    solved = newton_rows(rs, cfg.points[None, :], cfg.lift, interior=False, guesses=guesses)[0]
    if solved is None:
        raise NewtonDivergence(f"polish diverged from x0={cfg.x0:.6f}", x0=cfg.x0, m=cfg.m)
    return _as_configuration(solved, rs, cfg.lift)
