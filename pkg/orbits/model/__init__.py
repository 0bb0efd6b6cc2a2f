"""Model core: Fourier-parametrised Lagrangians, Legendre map, flow and monodromy."""
