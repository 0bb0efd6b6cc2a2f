"""Broken-geodesic discrete action: sub-arcs, configurations, Jacobi matrix, twist."""
