"""Regression, ranking and classification metrics over labeled pairs."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

DEFAULT_KS = (10, 20)


@dataclass
class MetricsReport:
    n_pairs: int
    mse: float
    mae: float
    rho: float
    tau: float
    p_at: dict = field(default_factory=dict)
    per_pair_time: float = 0.0
    accuracy: float | None = None
    n_queries: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p_at"] = {str(k): v for k, v in self.p_at.items()}
        return d


def mse(pred, truth) -> float:
    pred, truth = np.asarray(pred, float), np.asarray(truth, float)
    return float(np.mean((pred - truth) ** 2))


def mae(pred, truth) -> float:
    pred, truth = np.asarray(pred, float), np.asarray(truth, float)
    return float(np.mean(np.abs(pred - truth)))


def kendall_tau(x, y) -> float:
    """Kendall tau-b (tie-corrected)."""
    return float(stats.kendalltau(x, y).statistic)


def spearman_rho(x, y) -> float:
    """Spearman rank correlation with average ranks for ties."""
    return float(stats.spearmanr(x, y).statistic)


def top_k(ids, scores, k: int) -> list:
    """Ids of the ``k`` highest scores; equal scores are ordered by id."""
    order = sorted(range(len(ids)), key=lambda i: (-scores[i], ids[i]))
    return [ids[i] for i in order[:k]]


def precision_at_k(ids, pred, truth, k: int) -> float:
    kk = min(k, len(ids))
    if kk == 0:
        return math.nan
    return len(set(top_k(ids, pred, kk)) & set(top_k(ids, truth, kk))) / kk


def per_query(pairs, pred, truth):
    """Group pair predictions by query graph: ``{qid: (partner_ids, pred, truth)}``."""
    groups = defaultdict(lambda: ([], [], []))
    for (a, b), p, t in zip(pairs, pred, truth):
        for q, other in ((a, b), (b, a)):
            ids, ps, ts = groups[q]
            ids.append(other)
            ps.append(float(p))
            ts.append(float(t))
    return dict(groups)


def _nanmean(values) -> float:
    vals = [v for v in values if not math.isnan(v)]
    return float(np.mean(vals)) if vals else math.nan


def ranking_metrics(pairs, pred, truth, ks=DEFAULT_KS) -> dict:
    """Per-query rho, tau and p@k averaged over query graphs.

    Queries with fewer than two partners, or with constant predictions or
    truths (undefined correlation), are left out of rho and tau.
    """
    groups = per_query(pairs, pred, truth)
    rhos, taus = [], []
    p_at = {k: [] for k in ks}
    for q in sorted(groups):
        ids, ps, ts = groups[q]
        if len(ids) >= 2 and np.ptp(ps) > 0 and np.ptp(ts) > 0:
            rhos.append(spearman_rho(ps, ts))
            taus.append(kendall_tau(ps, ts))
        for k in ks:
            p_at[k].append(precision_at_k(ids, ps, ts, k))
    return {"rho": _nanmean(rhos), "tau": _nanmean(taus),
            "p_at": {k: _nanmean(v) for k, v in p_at.items()}, "n_queries": len(groups)}


def classification_accuracy(pred, classes, theta: float = 0.5) -> float:
    """Scores in ``[-1, 1]`` mapped to ``(s + 1) / 2`` and thresholded at ``theta``."""
    pred = np.asarray(pred, float)
    guess = np.where((pred + 1.0) / 2.0 >= theta, 1, -1)
    return float(np.mean(guess == np.asarray(classes)))


def permutation_pvalue(pred, classes, theta: float = 0.5, n_perm: int = 1000, seed: int = 0) -> float:
    """One-sided p-value of the observed accuracy against shuffled class labels."""
    rng = np.random.default_rng(seed)
    classes = np.asarray(classes)
    observed = classification_accuracy(pred, classes, theta)
    hits = sum(classification_accuracy(pred, rng.permutation(classes), theta) >= observed
               for _ in range(n_perm))
    return (hits + 1) / (n_perm + 1)


def report(pairs, pred, truth, classes=None, theta: float = 0.5, ks=DEFAULT_KS,
           per_pair_time: float = 0.0) -> MetricsReport:
    if len(pairs) == 0:
        raise ValueError("cannot report metrics on an empty pair set")
    rm = ranking_metrics(pairs, pred, truth, ks)
    acc = classification_accuracy(pred, classes, theta) if classes is not None else None
    return MetricsReport(n_pairs=len(pairs), mse=mse(pred, truth), mae=mae(pred, truth),
                         rho=rm["rho"], tau=rm["tau"], p_at=rm["p_at"],
                         per_pair_time=per_pair_time, accuracy=acc, n_queries=rm["n_queries"])
