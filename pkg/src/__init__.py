"""Schrodingerized Helmholtz - classical emulation of a damped-dynamics, Hamiltonian-simulation Helmholtz solver."""

__version__ = "1.0.0"
