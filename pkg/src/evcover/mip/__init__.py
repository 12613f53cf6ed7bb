"""Small bounded-integer LP/MIP engine: dual simplex plus branch-and-bound."""

from .branch_bound import NODE_LIMIT, TIME_LIMIT, solve_lp_relaxation, solve_mip
from .model import (BINARY, CONTINUOUS, INTEGER, Constraint, MipModel, MipSolution,
                    ModelError, Tolerances, Variable, linearize_product)

__all__ = [
    "BINARY", "CONTINUOUS", "INTEGER", "NODE_LIMIT", "TIME_LIMIT", "Constraint",
    "MipModel", "MipSolution", "ModelError", "Tolerances", "Variable",
    "linearize_product", "solve_lp_relaxation", "solve_mip",
]
