"""Test suite for the Schrodingerized Helmholtz emulator."""
