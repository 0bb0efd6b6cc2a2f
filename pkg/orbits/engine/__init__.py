"""Parallel execution of independent numerical tasks."""
