"""Numerical laboratory for i^beta d_t^beta u = |D|^alpha u + mu |u|^{p-1} u on the line."""

from .duhamel_solver import NonConvergence, SolverConfig, TimeMesh, Trajectory, picard_solve
from .linear_propagator import evolve_linear
from .mittag_leffler import MLOrder, ml_eval
from .spectral_field import FracParams, Grid, SpectralField

__version__ = "0.1.0"

__all__ = [
    "FracParams",
    "Grid",
    "MLOrder",
    "NonConvergence",
    "SolverConfig",
    "SpectralField",
    "TimeMesh",
    "Trajectory",
    "evolve_linear",
    "ml_eval",
    "picard_solve",
]
