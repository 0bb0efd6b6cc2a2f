"""Perturbation lab: first-order kernel, oscillation test, Monte-Carlo sweeps."""
