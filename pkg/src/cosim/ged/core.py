from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..graph import Graph

ALGORITHMS = ("oracle", "beam", "hungarian", "vj")


@dataclass(frozen=True)
class EditCostModel:
    node_ins: float = 1.0
    node_del: float = 1.0
    node_rel: float = 1.0
    edge_ins: float = 1.0
    edge_del: float = 1.0

    def __post_init__(self):
        for name in ("node_ins", "node_del", "node_rel", "edge_ins", "edge_del"):
            if getattr(self, name) < 0:
                raise ValueError(f"edit cost {name} must be >= 0")

    def array(self) -> np.ndarray:
        return np.array([self.node_ins, self.node_del, self.node_rel, self.edge_ins, self.edge_del])

    def reversed(self) -> "EditCostModel":
        """Cost model of the reverse edit path (insertions become deletions)."""
        return EditCostModel(self.node_del, self.node_ins, self.node_rel, self.edge_del, self.edge_ins)


UNIT_COSTS = EditCostModel()


@dataclass(frozen=True)
class GedBound:
    value: float
    kind: str
    algorithm: str
    elapsed: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in ("exact", "upper"):
            raise ValueError(f"bad bound kind {self.kind!r}")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"bad algorithm {self.algorithm!r}")
        if self.kind == "exact" and self.algorithm not in ("oracle", "beam"):
            raise ValueError("only the oracle or an exhaustive beam can certify an exact value")


def graph_arrays(g: Graph):
    adj = np.ascontiguousarray(g.adjacency, dtype=np.uint8)
    if g.node_labels is None:
        labels = np.full(g.n, -1, dtype=np.int64)
    else:
        labels = np.asarray(g.node_labels, dtype=np.int64)
    return adj, labels


def oriented(g1: Graph, g2: Graph, cost: EditCostModel):
    """Fix a canonical argument order so every solver is symmetric in its inputs.

    Returns ``(a, b, cost_ab, swapped)``; an edit path b -> a reversed is an
    edit path a -> b priced under the reversed cost model.
    """
    if g2.structure_key() < g1.structure_key():
        return g2, g1, cost.reversed(), True
    return g1, g2, cost, False


def processing_order(g: Graph) -> np.ndarray:
    """High-degree nodes first, index as tie-break."""
    return np.asarray(sorted(range(g.n), key=lambda u: (-int(g.degrees[u]), u)), dtype=np.int64)
