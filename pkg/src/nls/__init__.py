"""Nonlocal attractive-repulsive energies: evaluation, minimization and stability checks."""

__version__ = "0.1.0"
