"""Graph representation, dataset container and the JSON Lines on-disk format."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

GED_SOURCES = ("trim", "beam", "hungarian", "vj", "exact", "min-of-several")
SPLIT_NAMES = ("train", "val", "test")


class DatasetError(ValueError):
    """Raised when a dataset file cannot be parsed or violates an invariant."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


def canonical_edges(edges: Iterable[Sequence[int]], n: int, gid: str = "?") -> tuple:
    out = set()
    for e in edges:
        if len(e) != 2:
            raise DatasetError(f"graph {gid!r}: edge {list(e)} is not a pair")
        u, v = int(e[0]), int(e[1])
        if u == v:
            raise DatasetError(f"graph {gid!r}: self-loop on node {u}")
        if not (0 <= u < n and 0 <= v < n):
            raise DatasetError(f"graph {gid!r}: edge ({u}, {v}) out of range for n={n}")
        key = (u, v) if u < v else (v, u)
        if key in out:
            raise DatasetError(f"graph {gid!r}: duplicate edge {key}")
        out.add(key)
    return tuple(sorted(out))


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected simple graph.

    ``lineage`` names the basic graph a synthetic graph descends from and
    ``trim`` holds its trim log (a tuple of ``TrimOp``-like dicts); both are
    optional metadata carried through the file format.
    """

    id: str
    n: int
    edges: tuple
    node_labels: tuple | None = None
    features: np.ndarray | None = None
    lineage: str | None = None
    trim: tuple | None = None

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise DatasetError(f"graph {self.id!r}: node count must be an integer >= 1, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "edges", canonical_edges(self.edges, self.n, self.id))
        if self.node_labels is not None:
            labels = tuple(int(x) for x in self.node_labels)
            if len(labels) != self.n:
                raise DatasetError(f"graph {self.id!r}: {len(labels)} labels for {self.n} nodes")
            object.__setattr__(self, "node_labels", labels)
        if self.features is not None:
            feats = np.array(self.features, dtype=np.float64)
            if feats.ndim != 2 or feats.shape[0] != self.n:
                raise DatasetError(
                    f"graph {self.id!r}: features must be {self.n} x d, got shape {feats.shape}")
            feats.setflags(write=False)
            object.__setattr__(self, "features", feats)
        if self.trim is not None:
            object.__setattr__(self, "trim", tuple(dict(op) for op in self.trim))

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.float64)
        if self.edges:
            idx = np.asarray(self.edges)
            a[idx[:, 0], idx[:, 1]] = 1.0
            a[idx[:, 1], idx[:, 0]] = 1.0
        a.setflags(write=False)
        return a

    @cached_property
    def degrees(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=np.int64)
        for u, v in self.edges:
            d[u] += 1
            d[v] += 1
        return d

    def neighbors(self) -> list[list[int]]:
        nb: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            nb[u].append(v)
            nb[v].append(u)
        return nb

    def is_connected(self) -> bool:
        nb = self.neighbors()
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in nb[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.n

    def structure_key(self) -> tuple:
        """Identity-free key: equal keys means identical serialization up to id."""
        return (self.n, len(self.edges), self.edges, self.node_labels or ())

    def replace(self, **changes) -> "Graph":
        fields = dict(id=self.id, n=self.n, edges=self.edges, node_labels=self.node_labels,
                      features=self.features, lineage=self.lineage, trim=self.trim)
        fields.update(changes)
        return Graph(**fields)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        if (self.id, self.n, self.edges, self.node_labels, self.lineage, self.trim) != (
                other.id, other.n, other.edges, other.node_labels, other.lineage, other.trim):
            return False
        if (self.features is None) != (other.features is None):
            return False
        return self.features is None or np.array_equal(self.features, other.features)

    def __hash__(self):
        return hash((self.id, self.n, self.edges))

    def __repr__(self):
        return f"Graph(id={self.id!r}, n={self.n}, m={self.m})"


def similarity_from_ged(ged: float, n1: int, n2: int) -> float:
    return math.exp(-ged / ((n1 + n2) / 2.0))


@dataclass(frozen=True)
class LabeledPair:
    id_a: str
    id_b: str
    ged: int
    sim: float
    cls: int
    ged_source: str

    def __post_init__(self):
        if self.id_a > self.id_b:
            a, b = self.id_b, self.id_a
            object.__setattr__(self, "id_a", a)
            object.__setattr__(self, "id_b", b)
        if int(self.ged) != self.ged or self.ged < 0:
            raise DatasetError(f"pair ({self.id_a}, {self.id_b}): ged must be a nonnegative integer")
        object.__setattr__(self, "ged", int(self.ged))
        if self.cls not in (-1, 1):
            raise DatasetError(f"pair ({self.id_a}, {self.id_b}): class must be -1 or +1")
        if self.ged_source not in GED_SOURCES:
            raise DatasetError(f"pair ({self.id_a}, {self.id_b}): unknown ged source {self.ged_source!r}")
        if not (0.0 < self.sim <= 1.0):
            raise DatasetError(f"pair ({self.id_a}, {self.id_b}): sim {self.sim} outside (0, 1]")

    @property
    def key(self) -> tuple[str, str]:
        return (self.id_a, self.id_b)


@dataclass(frozen=True)
class Dataset:
    graphs: dict
    pairs: tuple = ()
    splits: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        self.validate()

    def validate(self):
        for gid, g in self.graphs.items():
            if gid != g.id:
                raise DatasetError(f"graph id mismatch: key {gid!r} vs {g.id!r}")
        for p in self.pairs:
            for gid in (p.id_a, p.id_b):
                if gid not in self.graphs:
                    raise DatasetError(f"pair references unknown graph id {gid!r}")
            ga, gb = self.graphs[p.id_a], self.graphs[p.id_b]
            expect = similarity_from_ged(p.ged, ga.n, gb.n)
            if abs(expect - p.sim) > 1e-12:
                raise DatasetError(
                    f"pair ({p.id_a}, {p.id_b}): sim {p.sim!r} disagrees with ged-derived {expect!r}")
        if self.splits:
            unknown = set(self.splits) - set(SPLIT_NAMES)
            if unknown:
                raise DatasetError(f"unknown split names {sorted(unknown)}")
            seen: dict[str, str] = {}
            for name, ids in self.splits.items():
                for gid in ids:
                    if gid not in self.graphs:
                        raise DatasetError(f"split {name!r} references unknown graph id {gid!r}")
                    if gid in seen:
                        raise DatasetError(f"graph {gid!r} appears in splits {seen[gid]!r} and {name!r}")
                    seen[gid] = name
            if len(seen) != len(self.graphs):
                missing = sorted(set(self.graphs) - set(seen))
                raise DatasetError(f"splits do not cover graphs, e.g. {missing[:3]}")

    def split_of(self) -> dict[str, str]:
        return {gid: name for name, ids in self.splits.items() for gid in ids}

    def pairs_in_split(self, split: str) -> list[LabeledPair]:
        members = set(self.splits.get(split, ()))
        return [p for p in self.pairs if p.id_a in members and p.id_b in members]

    def with_pairs(self, pairs) -> "Dataset":
        return Dataset(graphs=self.graphs, pairs=tuple(pairs), splits=self.splits)


# ---------------------------------------------------------------------------
# JSON Lines format


def _graph_record(g: Graph) -> dict:
    rec = {"kind": "graph", "id": g.id, "n": g.n, "edges": [list(e) for e in g.edges]}
    if g.node_labels is not None:
        rec["labels"] = list(g.node_labels)
    if g.features is not None:
        rec["features"] = g.features.tolist()
    if g.lineage is not None:
        rec["lineage"] = g.lineage
    if g.trim is not None:
        rec["trim"] = [dict(op) for op in g.trim]
    return rec


def _pair_record(p: LabeledPair) -> dict:
    return {"kind": "pair", "a": p.id_a, "b": p.id_b, "ged": p.ged, "sim": p.sim,
            "class": p.cls, "source": p.ged_source}


def dumps_dataset(ds: Dataset) -> str:
    lines = [json.dumps(_graph_record(ds.graphs[gid]), sort_keys=True) for gid in sorted(ds.graphs)]
    lines += [json.dumps(_pair_record(p), sort_keys=True) for p in sorted(ds.pairs, key=lambda p: p.key)]
    for name in SPLIT_NAMES:
        if name in ds.splits:
            lines.append(json.dumps({"kind": "split", "name": name, "ids": list(ds.splits[name])},
                                    sort_keys=True))
    return "".join(line + "\n" for line in lines)


def save_dataset(ds: Dataset, path) -> None:
    Path(path).write_text(dumps_dataset(ds), encoding="utf-8")


def loads_dataset(text: str) -> Dataset:
    graphs: dict[str, Graph] = {}
    pairs: list[LabeledPair] = []
    splits: dict[str, list[str]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"invalid JSON: {exc.msg}", line=lineno) from None
        if not isinstance(rec, dict):
            raise DatasetError("record is not an object", line=lineno)
        kind = rec.get("kind")
        try:
            if kind == "graph":
                if rec.get("directed"):
                    raise DatasetError(f"graph {rec.get('id')!r}: directed graphs are not supported")
                gid = str(rec["id"])
                if gid in graphs:
                    raise DatasetError(f"duplicate graph id {gid!r}")
                graphs[gid] = Graph(id=gid, n=rec["n"], edges=rec.get("edges", []),
                                    node_labels=rec.get("labels"), features=rec.get("features"),
                                    lineage=rec.get("lineage"), trim=rec.get("trim"))
            elif kind == "pair":
                pairs.append(LabeledPair(str(rec["a"]), str(rec["b"]), rec["ged"], float(rec["sim"]),
                                         int(rec["class"]), rec["source"]))
            elif kind == "split":
                splits[str(rec["name"])] = [str(x) for x in rec["ids"]]
            else:
                raise DatasetError(f"unknown record kind {kind!r}")
        except DatasetError as exc:
            if exc.line is None:
                raise DatasetError(str(exc), line=lineno) from None
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetError(f"malformed {kind} record: {exc!r}", line=lineno) from None
    return Dataset(graphs=graphs, pairs=tuple(pairs), splits=splits)


def load_dataset(path) -> Dataset:
    return loads_dataset(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Transformations


def permute(g: Graph, perm: Sequence[int]) -> Graph:
    """Relabel node ``i`` as ``perm[i]``; labels and feature rows move with their node."""
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(g.n)):
        raise ValueError(f"permutation of length {len(perm)} is not a bijection on 0..{g.n - 1}")
    edges = [(perm[u], perm[v]) for u, v in g.edges]
    inv = np.argsort(perm)
    labels = None if g.node_labels is None else tuple(g.node_labels[i] for i in inv)
    feats = None if g.features is None else g.features[inv]
    return g.replace(edges=edges, node_labels=labels, features=feats)


def feature_matrix(g: Graph, scheme: str = "degree-onehot", cap: int = 16) -> np.ndarray:
    """Input features for ``g`` without attaching them."""
    if scheme == "constant":
        feats = np.ones((g.n, 1))
    elif scheme == "degree-onehot":
        if cap < 1:
            raise ValueError(f"degree cap must be >= 1, got {cap}")
        feats = np.zeros((g.n, cap + 1))
        feats[np.arange(g.n), np.minimum(g.degrees, cap)] = 1.0
    else:
        raise ValueError(f"unknown feature scheme {scheme!r}")
    return feats


def init_features(g: Graph, scheme: str = "degree-onehot", cap: int = 16, overwrite: bool = False) -> Graph:
    if g.features is not None and not overwrite:
        raise ValueError(f"graph {g.id!r} already has features; pass overwrite=True")
    return g.replace(features=feature_matrix(g, scheme, cap))


def featurize(ds: Dataset, scheme: str = "degree-onehot", cap: int = 16) -> Dataset:
    graphs = {gid: init_features(g, scheme, cap, overwrite=True) for gid, g in ds.graphs.items()}
    return Dataset(graphs=graphs, pairs=ds.pairs, splits=ds.splits)
