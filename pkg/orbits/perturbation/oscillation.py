"""Quartic oscillation test on a sampled action profile: Osc_I F >= M |I|^4."""

from __future__ import annotations

import logging

import numpy as np

from orbits.classifier.profile import ActionProfile

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


def _window(profile: ActionProfile, interval: tuple[float, float]) -> np.ndarray:
    lo, hi = interval
    offset = np.mod(profile.base_points - lo, TWO_PI)
    inside = (offset <= hi - lo + 1e-12) & np.isfinite(profile.values)
    return profile.values[inside]


def oscillation(profile: ActionProfile, interval: tuple[float, float]) -> float:
    """max - min of the sampled F over the (cyclic) interval."""
    values = _window(profile, interval)
    return float(values.max() - values.min()) if values.size else 0.0


def quartic_constant(profile: ActionProfile) -> float:
    """max |d4F/dx4| / 12 from cyclic fourth differences of the profile."""
    v = profile.values
    h = profile.spacing
    fourth = np.roll(v, 2) - 4 * np.roll(v, 1) + 6 * v - 4 * np.roll(v, -1) + np.roll(v, -2)
    fourth = fourth[np.isfinite(fourth)]
    return float(np.max(np.abs(fourth)) / h**4 / 12.0) if fourth.size else 0.0


def osc_criterion(
    profile: ActionProfile,
    interval: tuple[float, float],
    M: float | None = None,
    floor: float = 1e-9,
) -> bool:
    """True when the profile oscillates by at least M |I|^4 over the interval."""
    lo, hi = interval
    if not hi > lo:
        raise ValueError(f"interval must be increasing, got {interval}")
    M = quartic_constant(profile) if M is None else M
    osc = oscillation(profile, interval)
    bound = M * (hi - lo) ** 4
    logger.debug(f"Osc over [{lo:.4f}, {hi:.4f}] = {osc:.3e}, M|I|^4 = {bound:.3e}")
    return osc > floor and osc >= bound
