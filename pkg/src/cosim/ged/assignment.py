"""Bipartite (Riesen-Bunke) GED upper bounds via linear assignment."""

from __future__ import annotations

import time

import numpy as np

from ..graph import Graph
from . import _kernels
from .core import UNIT_COSTS, EditCostModel, GedBound, graph_arrays, oriented

METHODS = ("hungarian", "vj")


class InfeasibleAssignment(ValueError):
    pass


def sentinel_for(costs: np.ndarray) -> float:
    finite = costs[np.isfinite(costs)]
    return float(np.abs(finite).sum()) + 1.0


def build_cost_matrix(g1: Graph, g2: Graph, cost: EditCostModel = UNIT_COSTS) -> np.ndarray:
    """(n1+n2) square matrix: substitutions | deletions over insertions | zeros.

    Forbidden cells hold a finite sentinel exceeding the sum of all finite
    entries, so any assignment touching one is worse than any that does not.
    Edge terms are halved because every edge is seen from both endpoints.
    """
    n1, n2 = g1.n, g2.n
    d1 = g1.degrees.astype(np.float64)
    d2 = g2.degrees.astype(np.float64)
    sub = np.empty((n1, n2))
    diff = d1[:, None] - d2[None, :]
    sub[:] = np.where(diff > 0, diff * cost.edge_del, -diff * cost.edge_ins) / 2.0
    if g1.node_labels is not None or g2.node_labels is not None:
        l1 = np.asarray(g1.node_labels if g1.node_labels is not None else [-1] * n1)
        l2 = np.asarray(g2.node_labels if g2.node_labels is not None else [-1] * n2)
        sub += (l1[:, None] != l2[None, :]) * cost.node_rel
    m = np.full((n1 + n2, n1 + n2), np.inf)
    m[:n1, :n2] = sub
    m[np.arange(n1), n2 + np.arange(n1)] = cost.node_del + d1 * cost.edge_del / 2.0
    m[n1 + np.arange(n2), np.arange(n2)] = cost.node_ins + d2 * cost.edge_ins / 2.0
    m[n1:, n2:] = 0.0
    m[~np.isfinite(m)] = sentinel_for(m)
    return m


def solve_assignment(costs, method: str = "hungarian", backend: str | None = None):
    """Minimum-cost perfect assignment of a square matrix; ``inf`` marks forbidden cells.

    Returns ``(assignment, total)`` with ``assignment[row] = column``.
    """
    c = np.array(costs, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] == 0:
        raise ValueError(f"cost matrix must be non-empty and square, got shape {c.shape}")
    if np.isnan(c).any():
        raise ValueError("cost matrix contains NaN")
    forbidden = ~np.isfinite(c)
    big = sentinel_for(c)
    c[forbidden] = big
    k = _kernels.get_backend(backend)
    if method == "hungarian":
        assign, total = k.hungarian(c)
    elif method == "vj":
        assign, total = k.lapjv(c)
    else:
        raise ValueError(f"unknown assignment method {method!r}")
    if forbidden[np.arange(len(assign)), assign].any():
        raise InfeasibleAssignment("no finite perfect assignment exists")
    return np.asarray(assign, dtype=np.int64), float(total)


def mapping_from_assignment(assign: np.ndarray, n1: int, n2: int) -> np.ndarray:
    """g1 node -> g2 node, or -1 when the row lands in the deletion block."""
    mapping = np.where(assign[:n1] < n2, assign[:n1], -1)
    return mapping.astype(np.int64)


def assignment_ged(g1: Graph, g2: Graph, cost: EditCostModel = UNIT_COSTS,
                   method: str = "hungarian", backend: str | None = None) -> GedBound:
    """Cost of the explicit edit path implied by the optimal node assignment."""
    k = _kernels.get_backend(backend)
    t0 = time.perf_counter()
    a, b, c, _ = oriented(g1, g2, cost)
    adj1, lab1 = graph_arrays(a)
    adj2, lab2 = graph_arrays(b)
    assign, lap_total = solve_assignment(build_cost_matrix(a, b, c), method, backend)
    mapping = mapping_from_assignment(assign, a.n, b.n)
    if a.structure_key() == b.structure_key():
        # ties in the LAP can hide the free identity path; never return worse than it
        identity = k.edit_path_cost(adj1, adj2, lab1, lab2, np.arange(a.n), c.array())
        if identity < k.edit_path_cost(adj1, adj2, lab1, lab2, mapping, c.array()):
            mapping = np.arange(a.n, dtype=np.int64)
    value = k.edit_path_cost(adj1, adj2, lab1, lab2, mapping, c.array())
    return GedBound(float(value), "upper", method, time.perf_counter() - t0, {"lap_total": lap_total})
