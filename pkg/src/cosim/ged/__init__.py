"""Classical graph edit distance: exact oracle, A*-beam and assignment bounds."""

from ._kernels import BACKEND, get_backend
from .assignment import (InfeasibleAssignment, assignment_ged, build_cost_matrix,
                         mapping_from_assignment, solve_assignment)
from .beam import DEFAULT_BEAM_WIDTH, beam_ged
from .core import UNIT_COSTS, EditCostModel, GedBound
from .exact import DEFAULT_NODE_BUDGET, BudgetExceeded, exact_ged


def compute_ged(g1, g2, algo: str, cost: EditCostModel = UNIT_COSTS,
                beam_width: int | None = DEFAULT_BEAM_WIDTH) -> GedBound:
    if algo == "exact":
        return exact_ged(g1, g2, cost)
    if algo == "beam":
        return beam_ged(g1, g2, cost, beam_width)
    if algo in ("hungarian", "vj"):
        return assignment_ged(g1, g2, cost, algo)
    raise ValueError(f"unknown GED algorithm {algo!r}")


__all__ = [
    "BACKEND", "get_backend", "EditCostModel", "GedBound", "UNIT_COSTS",
    "exact_ged", "beam_ged", "build_cost_matrix", "solve_assignment", "assignment_ged",
    "mapping_from_assignment", "compute_ged", "BudgetExceeded", "InfeasibleAssignment",
    "DEFAULT_BEAM_WIDTH", "DEFAULT_NODE_BUDGET",
]
