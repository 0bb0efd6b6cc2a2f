"""orbits: minimal periodic orbits of Tonelli Lagrangians on the two-torus."""

__version__ = "0.1.0"
