from __future__ import annotations

import time

import numpy as np

from ..graph import Graph
from . import _kernels
from .core import UNIT_COSTS, EditCostModel, GedBound, graph_arrays, oriented, processing_order

DEFAULT_BEAM_WIDTH = 100


def beam_ged(g1: Graph, g2: Graph, cost: EditCostModel = UNIT_COSTS,
             width: int | None = DEFAULT_BEAM_WIDTH, backend: str | None = None) -> GedBound:
    """A*-beam GED upper bound; ``width=None`` searches exhaustively (exact when it completes)."""
    if width is not None and width < 1:
        raise ValueError(f"beam width must be >= 1 or None, got {width}")
    k = _kernels.get_backend(backend)
    t0 = time.perf_counter()
    a, b, c, _ = oriented(g1, g2, cost)
    adj1, lab1 = graph_arrays(a)
    adj2, lab2 = graph_arrays(b)
    if a.structure_key() == b.structure_key():
        # identical structure: the identity edit path is free and optimal
        value = k.edit_path_cost(adj1, adj2, lab1, lab2, np.arange(a.n), c.array())
        return GedBound(float(value), "exact" if width is None else "upper", "beam",
                        time.perf_counter() - t0, {"width": "unbounded" if width is None else int(width)})
    value, _, exhaustive = k.beam_search(adj1, adj2, lab1, lab2, processing_order(a), c.array(),
                                         0 if width is None else int(width))
    kind = "exact" if (width is None and exhaustive) else "upper"
    return GedBound(float(value), kind, "beam", time.perf_counter() - t0,
                    {"width": "unbounded" if width is None else int(width)})
