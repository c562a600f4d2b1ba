"""Solvers for Stackelberg audit games with restricted inspection
resources and a configurable punishment rate."""

from .model import AuditGame, compute_deltas, audit_sets, validate_game
from .fpt import CoverageSolution, SolveConfig, solve_fpt
from .fptas import solve_fptas
from .target_specific import solve_px

__all__ = [
    "AuditGame",
    "CoverageSolution",
    "SolveConfig",
    "audit_sets",
    "compute_deltas",
    "solve_fpt",
    "solve_fptas",
    "solve_px",
    "validate_game",
]

__version__ = "0.1.0"
