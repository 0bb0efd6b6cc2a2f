"""Orbit classifier: action profile, global minimisers, hyperbolicity verdicts."""
