"""Energy-level reduction with x2 as time: reduced Hamiltonian, Lagrangian and flow."""
