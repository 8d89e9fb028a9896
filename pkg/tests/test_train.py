import csv
import math
from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cosim import autodiff as ad
from cosim.bench import bench_search, search
from cosim.labeling import LabelConfig, label_dataset
from cosim.nn import CoSimModel, ModelConfig
from cosim.synthgen import GenSpec, build_dataset
from cosim.train import (OptimState, TrainConfig, TrainingDiverged, evaluate, pair_targets, step,
                         train)

TINY_MODEL = ModelConfig(d_encode=8, d_pool=8, d_final=8, n_pool=3, h=2)


@pytest.fixture(scope="module")
def toy():
    ds = build_dataset(GenSpec(n=10, n_basic=2, per_basic=9, ged_max=4, seed=3))
    return label_dataset(ds, LabelConfig(beam_width=5, pairs="within-split"))


def test_adam_step_matches_closed_form():
    p = ad.parameter(np.array([[1.0, -2.0]]), "p")
    cfg = TrainConfig(lr=0.1)
    st = OptimState()
    g = np.array([[0.5, -0.25]])
    step({"p": p}, {"p": g}, st, cfg)
    # first bias-corrected Adam step moves each coordinate by lr * sign(g)
    assert_allclose(p.data, [[0.9, -1.9]], atol=1e-6)
    q = ad.parameter(np.array([[1.0]]), "q")
    step({"q": q}, {"q": np.array([[2.0]])}, OptimState(), replace(cfg, optimizer="gd"))
    assert_allclose(q.data, [[0.8]])
    with pytest.raises(ad.ShapeError):
        step({"p": p}, {"p": np.zeros(3)}, st, cfg)


def test_adam_minimizes_quadratic():
    p = ad.parameter(np.array([[3.0, -4.0]]), "p")
    cfg = TrainConfig(lr=0.05)
    st = OptimState()
    for _ in range(500):
        with ad.Tape() as tape:
            loss = ad.sum_all(ad.mul(p, p))
        step({"p": p}, tape.backward(loss), st, cfg)
    assert np.abs(p.data).max() < 1e-2


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(optimizer="sgd-momentum")
    with pytest.raises(ValueError):
        TrainConfig(mode="ranking")
    with pytest.raises(ValueError):
        TrainConfig(iterations=0)


def test_pair_targets_by_mode(toy):
    pairs = list(toy.pairs)[:5]
    assert_allclose(pair_targets(toy, pairs, "regression"), [p.sim for p in pairs])
    assert set(pair_targets(toy, pairs, "classification")) <= {-1.0, 1.0}


def test_training_lowers_loss_and_is_deterministic(toy, tmp_path):
    cfg = TrainConfig(iterations=40, batch_size=8, eval_every=10, lr=3e-3, model=TINY_MODEL)
    r1 = train(toy, cfg)
    r2 = train(toy, cfg)
    assert r1.best_val == r2.best_val
    assert [c["train_loss"] for c in r1.curve] == [c["train_loss"] for c in r2.curve]
    first = np.mean([c["train_loss"] for c in r1.curve[:5]])
    last = np.mean([c["train_loss"] for c in r1.curve[-5:]])
    assert last < first
    vals = [c["val_mse"] for c in r1.curve if c["val_mse"] is not None]
    assert r1.best_val == min(vals) and len(vals) == 4
    path = tmp_path / "curve.csv"
    r1.write_curve(path)
    with path.open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 40 and rows[9]["val_mse"] != "" and rows[0]["val_mse"] == ""


def test_best_snapshot_is_restored(toy):
    cfg = TrainConfig(iterations=30, batch_size=8, eval_every=10, model=TINY_MODEL)
    res = train(toy, cfg)
    rep = evaluate(res.model, toy, "val")
    assert rep.mse == pytest.approx(res.best_val, rel=1e-9)


def test_divergence_raises(toy):
    cfg = TrainConfig(iterations=5, batch_size=4, lr=1e300, optimizer="gd", model=TINY_MODEL)
    with pytest.raises(TrainingDiverged):
        with np.errstate(all="ignore"):
            train(toy, cfg)


def test_evaluate_reports_all_metrics(toy):
    rep = evaluate(CoSimModel(TINY_MODEL), toy, "test", mode="classification")
    assert rep.n_pairs == len(toy.pairs_in_split("test"))
    assert 0.0 <= rep.accuracy <= 1.0
    assert set(rep.p_at) == {10, 20}
    assert not math.isnan(rep.mse)
    with pytest.raises(ValueError):
        evaluate(CoSimModel(TINY_MODEL), toy.with_pairs([]), "test")


def test_bench_search_rows(toy):
    model = CoSimModel(TINY_MODEL)
    graphs = [toy.graphs[k] for k in sorted(toy.graphs)]
    rep = bench_search(model, graphs[:6], graphs[6:8], reps=2, warmup=1, scenario="toy")
    cos, whole = rep.row("cosim"), rep.row("matcher")
    assert cos.K == whole.K == 6
    assert cos.per_pair_s > 0 and whole.per_pair_s > 0
    assert whole.n_pool is None and cos.n_pool == 3
    with pytest.raises(ValueError):
        bench_search(model, [], graphs[:1])


def test_search_orders_by_score_then_id(toy):
    model = CoSimModel(TINY_MODEL)
    stored = {gid: model.precompute(g) for gid, g in toy.graphs.items()}
    q = toy.graphs[sorted(toy.graphs)[0]]
    hits = search(model, q, stored, k=5)
    assert len(hits) == 5
    keys = [(-s, gid) for gid, s in hits]
    assert keys == sorted(keys)
    assert hits[0][1] == pytest.approx(1.0)
