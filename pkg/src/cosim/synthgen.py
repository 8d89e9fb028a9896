"""Synthetic BA/ER benchmark generation with GED-tracked trimmed derivatives.

Each basic graph seeds a *lineage* of derived graphs made by a random
sequence of trim operations (delete a leaf, add a leaf, add an edge).  Every
operation records its unit edit cost, so the log total is an upper bound on
the GED between the basic graph and the derivative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Dataset, Graph, LabeledPair, similarity_from_ged

TRIM_KINDS = ("delete-leaf", "add-leaf", "add-edge")
# node op + its single incident edge / a lone edge insertion, at unit costs
TRIM_COST = {"delete-leaf": 2, "add-leaf": 2, "add-edge": 1}
MAX_RETRIES = 100


class TrimError(RuntimeError):
    pass


@dataclass(frozen=True)
class GenSpec:
    family: str = "BA"
    n: int = 60
    ba_m: int = 1
    er_p: float = 0.0205
    n_basic: int = 2
    per_basic: int = 99
    ged_min: int = 1
    ged_max: int = 10
    seed: int = 0
    prefix: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", self.family.upper())
        if self.family not in ("BA", "ER"):
            raise ValueError(f"family must be BA or ER, got {self.family!r}")
        if self.ged_min < 1 or self.ged_max < self.ged_min:
            raise ValueError(f"bad GED range {self.ged_min}..{self.ged_max}")
        if self.n_basic < 1 or self.per_basic < 0:
            raise ValueError("n_basic must be >= 1 and per_basic >= 0")

    @property
    def name(self) -> str:
        return self.prefix or f"{self.family.lower()}{self.n}"


def lineage_rng(seed: int, lineage: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & (2**64 - 1), lineage]))


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def gen_ba(n: int, m: int, seed, gid: str = "ba") -> Graph:
    """Barabasi-Albert preferential attachment grown from ``m`` isolated seed nodes."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if n < m + 1:
        raise ValueError(f"BA graph needs n >= m + 1 (n={n}, m={m})")
    rng = _as_rng(seed)
    edges: list[tuple[int, int]] = []
    # one entry per edge endpoint, so uniform draws are degree-proportional
    endpoints: list[int] = []
    for new in range(m, n):
        if not endpoints:
            targets = list(range(m))
        else:
            chosen: set[int] = set()
            while len(chosen) < m:
                chosen.add(endpoints[int(rng.integers(len(endpoints)))])
            targets = sorted(chosen)
        for t in targets:
            edges.append((t, new))
            endpoints.extend((t, new))
    return Graph(id=gid, n=n, edges=edges)


def gen_er(n: int, p: float, seed, gid: str = "er") -> Graph:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"edge probability must lie in [0, 1], got {p}")
    rng = _as_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    return Graph(id=gid, n=n, edges=list(zip(iu[keep].tolist(), ju[keep].tolist())))


def uniform_random_tree(n: int, seed) -> Graph:
    """Uniform random attachment (each new node picks a uniformly random parent)."""
    rng = _as_rng(seed)
    return Graph(id="urt", n=n, edges=[(int(rng.integers(v)), v) for v in range(1, n)])


# ---------------------------------------------------------------------------
# Trimming


def _trim_state(g: Graph):
    adj = [set() for _ in range(g.n)]
    for u, v in g.edges:
        adj[u].add(v)
        adj[v].add(u)
    return adj


def _delete_node(adj: list[set], tags: list, x: int):
    for y in adj[x]:
        adj[y].discard(x)
    del adj[x]
    del tags[x]
    for s in adj:
        shifted = {y - 1 if y > x else y for y in s}
        s.clear()
        s.update(shifted)


def apply_trim_op(adj: list[set], op: dict, tags: list | None = None) -> None:
    """Apply one logged op in place; node indices refer to the graph at that step."""
    tags = tags if tags is not None else [None] * len(adj)
    kind = op["kind"]
    if kind == "delete-leaf":
        x = op["node"]
        if len(adj[x]) != 1:
            raise TrimError(f"node {x} is not a leaf")
        _delete_node(adj, tags, x)
    elif kind == "add-leaf":
        t = op["attach"]
        adj.append({t})
        tags.append(("new", len(tags)))
        adj[t].add(len(adj) - 1)
    elif kind == "add-edge":
        u, v = op["edge"]
        if v in adj[u] or u == v:
            raise TrimError(f"edge ({u}, {v}) already present")
        adj[u].add(v)
        adj[v].add(u)
    else:
        raise TrimError(f"unknown trim op {kind!r}")


def _graph_from_adj(gid: str, adj: list[set]) -> Graph:
    edges = [(u, v) for u, s in enumerate(adj) for v in s if u < v]
    return Graph(id=gid, n=len(adj), edges=edges)


def trim(basic: Graph, ged_target: int, seed, gid: str | None = None):
    """Derive a graph whose trim log costs exactly ``ged_target`` unit edits.

    Returns ``(derived, ops)`` where ``ops`` is a list of dicts with keys
    ``kind``, ``cost`` and the op detail (``node``, ``attach`` or ``edge``).
    Nodes added by the log are never deleted and a leaf whose only edge was
    added by the log is never deleted, so no op undoes another.
    """
    if ged_target < 1:
        raise ValueError(f"ged_target must be >= 1, got {ged_target}")
    rng = _as_rng(seed)
    adj = _trim_state(basic)
    tags: list = [("orig", i) for i in range(basic.n)]
    added_edges: set[frozenset] = set()
    ops: list[dict] = []
    budget = ged_target
    retries = 0
    while budget > 0:
        kind = TRIM_KINDS[int(rng.integers(3))]
        op = _draw_op(kind, adj, tags, added_edges, budget, rng)
        if op is None:
            retries += 1
            if retries > MAX_RETRIES:
                raise TrimError(f"no legal trim op after {MAX_RETRIES} retries "
                                f"({budget} of {ged_target} edit units left)")
            continue
        retries = 0
        if kind == "add-edge":
            u, v = op["edge"]
            added_edges.add(frozenset((tags[u], tags[v])))
        apply_trim_op(adj, op, tags)
        if kind == "add-leaf":
            tags[-1] = ("new", len(ops))
        ops.append(op)
        budget -= op["cost"]
    derived = _graph_from_adj(gid or f"{basic.id}_t", adj)
    return derived.replace(lineage=basic.lineage or basic.id, trim=tuple(ops)), ops


def _draw_op(kind, adj, tags, added_edges, budget, rng):
    cost = TRIM_COST[kind]
    if cost > budget:
        return None
    n = len(adj)
    if kind == "delete-leaf":
        if n <= 2:
            return None
        leaves = [x for x in range(n) if len(adj[x]) == 1 and tags[x][0] == "orig"
                  and frozenset((tags[x], tags[next(iter(adj[x]))])) not in added_edges]
        if not leaves:
            return None
        return {"kind": kind, "cost": cost, "node": leaves[int(rng.integers(len(leaves)))]}
    if kind == "add-leaf":
        return {"kind": kind, "cost": cost, "attach": int(rng.integers(n))}
    non_edges = n * (n - 1) // 2 - sum(len(s) for s in adj) // 2
    if non_edges == 0:
        return None
    # rejection sampling stays cheap on the sparse graphs generated here
    while True:
        u, v = int(rng.integers(n)), int(rng.integers(n))
        if u != v and v not in adj[u]:
            return {"kind": kind, "cost": cost, "edge": [min(u, v), max(u, v)]}


def replay(basic: Graph, ops) -> Graph:
    adj = _trim_state(basic)
    for op in ops:
        apply_trim_op(adj, op)
    return _graph_from_adj("replay", adj)


def trim_cost(g: Graph) -> int:
    return sum(int(op["cost"]) for op in (g.trim or ()))


def trim_bound(ga: Graph, gb: Graph) -> int | None:
    """Upper bound on GED(ga, gb) through their common basic graph, if any."""
    la = ga.lineage or ga.id
    lb = gb.lineage or gb.id
    if la != lb:
        return None
    return trim_cost(ga) + trim_cost(gb)


# ---------------------------------------------------------------------------
# Dataset assembly


def _lineage(spec: GenSpec, b: int):
    rng = lineage_rng(spec.seed, b)
    bid = f"{spec.name}_b{b}"
    if spec.family == "BA":
        basic = gen_ba(spec.n, spec.ba_m, rng, gid=bid)
    else:
        basic = gen_er(spec.n, spec.er_p, rng, gid=bid)
    basic = basic.replace(lineage=bid, trim=())
    width = spec.ged_max - spec.ged_min + 1
    derived = []
    for k in range(spec.per_basic):
        target = spec.ged_min + k % width
        g, _ = trim(basic, target, rng, gid=f"{bid}_d{k:03d}")
        derived.append(g)
    return [basic] + derived


def random_splits(ids, seed: int, fractions=(0.6, 0.2, 0.2)) -> dict:
    ids = sorted(ids)
    rng = np.random.default_rng(np.random.SeedSequence([seed & (2**64 - 1), 0x5917]))
    order = [ids[i] for i in rng.permutation(len(ids))]
    n_train = int(round(fractions[0] * len(ids)))
    n_val = int(round(fractions[1] * len(ids)))
    return {"train": sorted(order[:n_train]),
            "val": sorted(order[n_train:n_train + n_val]),
            "test": sorted(order[n_train + n_val:])}


def build_dataset(spec: GenSpec) -> Dataset:
    """Basic graphs, their derivatives, trim-bounded same-lineage pairs and a 60/20/20 split."""
    graphs: dict[str, Graph] = {}
    lineages = [_lineage(spec, b) for b in range(spec.n_basic)]
    for members in lineages:
        for g in members:
            graphs[g.id] = g
    pairs = []
    for members in lineages:
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                a, b = members[i], members[j]
                ged = trim_bound(a, b)
                pairs.append(LabeledPair(a.id, b.id, ged, similarity_from_ged(ged, a.n, b.n), 1, "trim"))
    return Dataset(graphs=graphs, pairs=tuple(pairs), splits=random_splits(graphs, spec.seed))
