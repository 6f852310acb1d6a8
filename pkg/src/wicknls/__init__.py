"""Couple diagrams, lattice counting, time kernels and kinetic solvers for the cubic NLS on a large torus."""

from __future__ import annotations

from .errors import BudgetError, CapacityError, ValidationError, WickNLSError

__version__ = "0.1.0"

__all__ = ["BudgetError", "CapacityError", "ValidationError", "WickNLSError", "__version__"]
