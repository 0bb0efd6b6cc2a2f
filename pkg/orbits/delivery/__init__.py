"""Delivery: write result files and console summaries."""
