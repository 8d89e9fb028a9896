"""Exact GED by best-first A* over partial node mappings (desk-scale oracle)."""

from __future__ import annotations

import heapq
import time
from collections import Counter

from ..graph import Graph
from .core import UNIT_COSTS, EditCostModel, GedBound

DEFAULT_NODE_BUDGET = 8


class BudgetExceeded(ValueError):
    pass


def _label_bound(rem1: Counter, rem2: Counter, r1: int, r2: int, cost: EditCostModel) -> float:
    common = sum((rem1 & rem2).values())
    subs = min(r1, r2)
    return max(0, subs - common) * min(cost.node_rel, cost.node_del + cost.node_ins)


def exact_ged(g1: Graph, g2: Graph, cost: EditCostModel = UNIT_COSTS,
              node_budget: int = DEFAULT_NODE_BUDGET) -> GedBound:
    """Minimal edit-path cost; refuses graphs larger than ``node_budget``.

    The admissible heuristic adds three independent lower bounds on the
    remaining cost: unmatched node count difference, label mismatches among
    the nodes that must be substituted, and the difference in not yet
    accounted edges.
    """
    if max(g1.n, g2.n) > node_budget:
        raise BudgetExceeded(f"exact GED refused: {max(g1.n, g2.n)} nodes exceeds budget {node_budget}")
    t0 = time.perf_counter()
    n1, n2 = g1.n, g2.n
    a1 = [[bool(x) for x in row] for row in g1.adjacency]
    a2 = [[bool(x) for x in row] for row in g2.adjacency]
    l1 = list(g1.node_labels) if g1.node_labels is not None else [None] * n1
    l2 = list(g2.node_labels) if g2.node_labels is not None else [None] * n2
    m1, m2 = g1.m, g2.m
    labeled = g1.node_labels is not None or g2.node_labels is not None
    e1_within = [0] * (n1 + 1)
    for d in range(n1):
        e1_within[d + 1] = e1_within[d] + sum(a1[d][j] for j in range(d))

    def heuristic(depth: int, used: frozenset, e2_used: int) -> float:
        r1 = n1 - depth
        r2 = n2 - len(used)
        h = max(0, r1 - r2) * cost.node_del + max(0, r2 - r1) * cost.node_ins
        if labeled:
            rem1 = Counter(l1[depth:])
            rem2 = Counter(l2[v] for v in range(n2) if v not in used)
            h += _label_bound(rem1, rem2, r1, r2, cost)
        e1_rem = m1 - e1_within[depth]
        e2_rem = m2 - e2_used
        if e1_rem > e2_rem:
            h += (e1_rem - e2_rem) * cost.edge_del
        else:
            h += (e2_rem - e1_rem) * cost.edge_ins
        return h

    # heap entry: (f, -g, mapping, complete, e2_used); mapping[i] is the image of g1 node i.
    # Ties on f go to the deeper (larger g) state, then to the smaller mapping.
    start = (heuristic(0, frozenset(), 0), -0.0, (), False, 0)
    heap = [start]
    expanded = 0
    while heap:
        f, neg_g, mapping, complete, e2_used = heapq.heappop(heap)
        g = -neg_g
        if complete:
            return GedBound(g, "exact", "oracle", time.perf_counter() - t0,
                            {"expanded": expanded, "mapping": list(mapping)})
        expanded += 1
        depth = len(mapping)
        used = frozenset(v for v in mapping if v >= 0)
        if depth == n1:
            rest = [v for v in range(n2) if v not in used]
            gc = g + len(rest) * cost.node_ins + (m2 - e2_used) * cost.edge_ins
            heapq.heappush(heap, (gc, -gc, mapping, True, m2))
            continue
        u = depth
        for v in list(range(n2)) + [-1]:
            if v in used:
                continue
            if v < 0:
                inc = cost.node_del
            else:
                inc = cost.node_rel if l1[u] != l2[v] else 0.0
            e2c = e2_used
            for j, vj in enumerate(mapping):
                e1 = a1[u][j]
                e2 = v >= 0 and vj >= 0 and a2[vj][v]
                if e2:
                    e2c += 1
                if e1 != e2:
                    inc += cost.edge_del if e1 else cost.edge_ins
            child = mapping + (v,)
            nused = used | {v} if v >= 0 else used
            gc = g + inc
            heapq.heappush(heap, (gc + heuristic(depth + 1, nused, e2c), -gc, child, False, e2c))
    raise AssertionError("A* exhausted the search space without completing a path")
