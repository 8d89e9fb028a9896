"""Similarity-search timing: precomputed coarsened database vs whole-graph matching."""

from __future__ import annotations

import csv
import statistics
import time
from dataclasses import asdict, dataclass

import numpy as np

from .graph import Graph
from .nn import CoSimModel

MODELS = ("cosim", "matcher")


@dataclass
class TimingRow:
    model: str
    K: int
    n: float
    m: float
    n_pool: int | None
    d_final: int
    precompute_s: float
    per_query_s: float
    per_pair_s: float
    reps: int


@dataclass
class TimingReport:
    scenario: str
    rows: list

    def row(self, model: str) -> TimingRow:
        return next(r for r in self.rows if r.model == model)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            cols = [f for f in TimingRow.__dataclass_fields__]
            w.writerow(["scenario"] + cols)
            for r in self.rows:
                d = asdict(r)
                w.writerow([self.scenario] + [d[c] for c in cols])


def _median_time(fn, reps: int, warmup: int) -> float:
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def bench_search(model: CoSimModel, db: list[Graph], queries: list[Graph],
                 models=MODELS, reps: int = 30, warmup: int = 3, scenario: str = "") -> TimingReport:
    """Median wall-clock timings over ``reps`` repetitions (after ``warmup``).

    ``cosim`` embeds and coarsens the database once, then per query embeds
    the query and matches it against every stored coarsened graph.
    ``per_pair_s`` is the matching time alone divided by the database size.
    ``matcher`` reuses the same encoder and matching weights on the full,
    unpooled graphs and runs the whole pipeline for every pair.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if not db or not queries:
        raise ValueError("bench_search needs a non-empty database and query list")
    k = len(db)
    n_mean = float(np.mean([g.n for g in db]))
    m_mean = float(np.mean([g.m for g in db]))
    rows = []
    if "cosim" in models:
        t0 = time.perf_counter()
        stored = [model.precompute(g) for g in db]
        precompute = time.perf_counter() - t0
        query_t, pair_t = [], []
        for q in queries:
            def match_all(eq):
                for e in stored:
                    model.score_embedded(eq, e)

            def full_query():
                match_all(model.precompute(q))

            eq = model.precompute(q)
            query_t.append(_median_time(full_query, reps, warmup))
            pair_t.append(_median_time(lambda: match_all(eq), reps, warmup) / k)
        rows.append(TimingRow("cosim", k, n_mean, m_mean, model.cfg.n_pool, model.cfg.d_final,
                              precompute, statistics.median(query_t), statistics.median(pair_t), reps))
    if "matcher" in models:
        whole = model if not model.cfg.pooling else model.with_config(pooling=False)
        query_t = []
        for q in queries:
            def full_query():
                for g in db:
                    whole.predict(q, g)

            query_t.append(_median_time(full_query, reps, warmup))
        per_query = statistics.median(query_t)
        rows.append(TimingRow("matcher", k, n_mean, m_mean, None, whole.cfg.d_final,
                              0.0, per_query, per_query / k, reps))
    return TimingReport(scenario, rows)


def search(model: CoSimModel, query: Graph, stored: dict, k: int = 10) -> list[tuple[str, float]]:
    """Top-``k`` ``(id, score)`` against precomputed ``{id: embedding}``; ties by id."""
    eq = model.precompute(query)
    scored = [(gid, model.score_embedded(eq, stored[gid])) for gid in sorted(stored)]
    scored.sort(key=lambda t: (-t[1], t[0]))
    return scored[:k]
