"""Solution methods for the bilevel station-planning model."""

from .common import (FAILED, INFEASIBLE, INFEASIBLE_BUDGET, INFEASIBLE_CAPACITY, NOT_R_DENSE,
                     OPTIMAL, SOLVED, BilevelResult, plan_violations)
from .e1 import build_e1, dual_bound, solve_e1
from .e2 import CORRECTED, LITERAL, build_e2, solve_e2
from .heuristic import CUMULATIVE, SINGLE, HeuristicStep, HeuristicTrace, run_heuristic, solve_heuristic
from .oracle import SIZE_LIMIT, bilevel_oracle

__all__ = [
    "BilevelResult", "HeuristicStep", "HeuristicTrace", "plan_violations", "bilevel_oracle",
    "build_e1", "build_e2", "dual_bound", "run_heuristic", "solve_e1", "solve_e2",
    "solve_heuristic", "CORRECTED", "CUMULATIVE", "FAILED", "INFEASIBLE", "INFEASIBLE_BUDGET",
    "INFEASIBLE_CAPACITY", "LITERAL", "NOT_R_DENSE", "OPTIMAL", "SINGLE", "SIZE_LIMIT", "SOLVED",
]
