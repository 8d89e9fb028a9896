"""Quick invariant checks runnable from an installed package (no pytest needed)."""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad
from .ged import assignment_ged, beam_ged, exact_ged, get_backend
from .graph import permute, similarity_from_ged
from .nn import CoSimModel, ModelConfig
from .synthgen import gen_ba, gen_er

SMALL_MODEL = ModelConfig(d_encode=16, d_pool=16, d_final=16, n_pool=4, h=2)


def _random_pairs(n_pairs: int, max_n: int, seed: int):
    rng = np.random.default_rng(seed)
    for i in range(n_pairs):
        n1, n2 = (int(x) for x in rng.integers(1, max_n + 1, size=2))
        p1, p2 = rng.uniform(0.2, 0.7, size=2)
        yield gen_er(n1, p1, rng, f"a{i}"), gen_er(n2, p2, rng, f"b{i}")


def check_lap_backends() -> str:
    py = get_backend("python")
    fast = get_backend(None)
    rng = np.random.default_rng(1)
    for _ in range(50):
        n = int(rng.integers(1, 12))
        c = rng.integers(0, 20, size=(n, n)).astype(float)
        totals = {py.hungarian(c)[1], py.lapjv(c)[1], fast.hungarian(c)[1], fast.lapjv(c)[1]}
        if len(totals) != 1:
            raise AssertionError(f"assignment totals disagree: {sorted(totals)}")
    return f"4 solvers agree on 50 matrices ({fast.BACKEND} backend)"


def check_ged_soundness() -> str:
    n = 0
    for g1, g2 in _random_pairs(30, 6, 2):
        exact = exact_ged(g1, g2).value
        if beam_ged(g1, g2, width=None).value != exact:
            raise AssertionError(f"unbounded beam differs from exact on {g1}, {g2}")
        for algo in ("hungarian", "vj"):
            if assignment_ged(g1, g2, method=algo).value < exact - 1e-9:
                raise AssertionError(f"{algo} below exact on {g1}, {g2}")
        n += 1
    return f"{n} pairs: bounds >= exact, unbounded beam == exact"


def check_similarity() -> str:
    s = similarity_from_ged(6, 60, 60)
    if abs(s - math.exp(-0.1)) > 1e-12:
        raise AssertionError(f"similarity(6, 60, 60) = {s}")
    vals = [similarity_from_ged(k, 10, 10) for k in range(21)]
    if not all(a > b for a, b in zip(vals, vals[1:])):
        raise AssertionError("similarity not strictly decreasing")
    return "exp(-ged / mean size) verified"


def check_model_invariants() -> str:
    model = CoSimModel(SMALL_MODEL)
    rng = np.random.default_rng(3)
    g1 = gen_ba(12, 1, rng, "x")
    g2 = gen_ba(15, 1, rng, "y")
    s12, s21 = model.predict(g1, g2), model.predict(g2, g1)
    if abs(s12 - s21) > 1e-9 or abs(model.predict(g1, g1) - 1.0) > 1e-9:
        raise AssertionError("score symmetry or self-similarity violated")
    perm = rng.permutation(g1.n)
    xp, ap, c = model.pooled(g1)
    xq, aq, _ = model.pooled(permute(g1, perm))
    if np.abs(xp - xq).max() > 1e-9 or np.abs(ap - aq).max() > 1e-9:
        raise AssertionError("pooling is not permutation invariant")
    if np.abs(c.sum(axis=1) - 1).max() > 1e-9:
        raise AssertionError("assignment rows do not sum to 1")
    return "symmetry, identity and pooling invariance hold"


def check_gradients() -> str:
    model = CoSimModel(SMALL_MODEL)
    rng = np.random.default_rng(4)
    g1, g2 = gen_er(6, 0.5, rng, "p"), gen_er(6, 0.5, rng, "q")
    report = ad.gradcheck(lambda: ad.mse(model.forward(g1, g2), [0.3]), model.params, samples=200)
    if report.max_rel_err >= 1e-4:
        raise AssertionError(f"gradcheck max rel err {report.max_rel_err:.2e} at {report.offending_param}")
    return f"max rel err {report.max_rel_err:.1e} over {report.checked} coordinates"


CHECKS = [
    ("lap-backends", check_lap_backends),
    ("ged-soundness", check_ged_soundness),
    ("similarity", check_similarity),
    ("model-invariants", check_model_invariants),
    ("gradients", check_gradients),
]


def run(echo=print) -> bool:
    ok = True
    for name, fn in CHECKS:
        try:
            detail = fn()
            echo(f"PASS {name}: {detail}")
        except AssertionError as exc:
            ok = False
            echo(f"FAIL {name}: {exc}")
    return ok
