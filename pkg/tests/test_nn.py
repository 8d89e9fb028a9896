from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from cosim import autodiff as ad
from cosim.graph import Graph, feature_matrix, permute
from cosim.nn import CoSimModel, ModelConfig, load_checkpoint, save_checkpoint
from cosim.nn.encoding import encode, gcn_propagator, init_encoder
from cosim.nn.matching import cross_mask, gat
from cosim.nn.pooling import init_pool, pool
from cosim.synthgen import gen_ba, gen_er

SMALL = ModelConfig(d_encode=8, d_pool=8, d_final=8, n_pool=3, h=2)


def _encoder(kind="gin", k=2, d_in=17, d=8, seed=0):
    rng = np.random.default_rng(seed)
    params, bn = {}, {}
    init_encoder(rng, params, bn, kind, k, d_in, d)
    return params, bn


@pytest.fixture(scope="module")
def graphs():
    rng = np.random.default_rng(7)
    return [gen_ba(int(rng.integers(5, 14)), 1, rng, f"g{i}") for i in range(6)]


# -- encoding -------------------------------------------------------------


def test_gcn_propagator_is_symmetric_normalized():
    g = Graph("p", 3, [(0, 1), (1, 2)])
    p = gcn_propagator(g.adjacency)
    assert_allclose(p, p.T)
    a = g.adjacency + np.eye(3)
    d = a.sum(axis=1)
    assert_allclose(p, a / np.sqrt(np.outer(d, d)))


@pytest.mark.parametrize("kind", ["gin", "gcn"])
def test_encoder_is_permutation_equivariant(kind, graphs):
    params, bn = _encoder(kind)
    g = graphs[0]
    perm = np.random.default_rng(1).permutation(g.n)
    h = permute(g, perm)
    x1, _ = encode(ad.Tensor(feature_matrix(g)), g.adjacency, params, bn, kind, 2)
    x2, _ = encode(ad.Tensor(feature_matrix(h)), h.adjacency, params, bn, kind, 2)
    assert_allclose(x2.data[perm], x1.data, atol=1e-12)


@pytest.mark.parametrize("kind", ["gin", "gcn"])
def test_padded_batch_matches_single_graphs(kind, graphs):
    params, bn = _encoder(kind)
    n_max = max(g.n for g in graphs)
    x = np.zeros((len(graphs), n_max, 17))
    adj = np.zeros((len(graphs), n_max, n_max))
    mask = np.zeros((len(graphs), n_max, 1))
    for i, g in enumerate(graphs):
        x[i, :g.n] = feature_matrix(g)
        adj[i, :g.n, :g.n] = g.adjacency
        mask[i, :g.n] = 1
    hb, _ = encode(ad.Tensor(x), adj, params, bn, kind, 2, mask=mask)
    for i, g in enumerate(graphs):
        hs, _ = encode(ad.Tensor(feature_matrix(g)), g.adjacency, params, bn, kind, 2)
        assert_allclose(hb.data[i, :g.n], hs.data, atol=1e-12)
        assert_allclose(hb.data[i, g.n:], 0.0)


def test_encoder_rejects_wrong_feature_width():
    params, bn = _encoder()
    with pytest.raises(ad.ShapeError):
        encode(ad.Tensor(np.ones((3, 5))), np.zeros((3, 3)), params, bn, "gin", 2)


def test_running_stats_mode_uses_updated_averages(graphs):
    params, bn = _encoder()
    g = graphs[1]
    x = ad.Tensor(feature_matrix(g))
    own, _ = encode(x, g.adjacency, params, bn, "gin", 2, bn_stats="graph")
    fresh, _ = encode(x, g.adjacency, params, bn, "gin", 2, bn_stats="running")
    encode(x, g.adjacency, params, bn, "gin", 2, train=True)
    moved, _ = encode(x, g.adjacency, params, bn, "gin", 2, bn_stats="running")
    again, _ = encode(x, g.adjacency, params, bn, "gin", 2, bn_stats="graph")
    assert not np.allclose(fresh.data, moved.data)
    assert_allclose(own.data, again.data)
    with pytest.raises(ValueError):
        encode(x, g.adjacency, params, bn, "gin", 2, bn_stats="batch")


# -- pooling --------------------------------------------------------------


def _pool_params(h=3, n_pool=4, d=8, gamma="softmax", seed=0):
    params = {}
    init_pool(np.random.default_rng(seed), params, h, n_pool, d, d, gamma)
    return params


@pytest.mark.parametrize("norm", ["softmax", "shifted-l1"])
@pytest.mark.parametrize("gamma", ["softmax", "free"])
def test_assignment_rows_sum_to_one(norm, gamma):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(9, 8))
    adj = gen_er(9, 0.4, rng).adjacency
    xp, ap, c = pool(x, adj, _pool_params(gamma=gamma), 3, 4, norm, gamma)
    assert c.shape == (4, 9) and xp.shape == (4, 8) and ap.shape == (4, 4)
    assert_allclose(c.data.sum(axis=1), 1.0, atol=1e-12)
    assert (ap.data >= 0).all() and (xp.data >= 0).all()
    assert_allclose(ap.data, ap.data.T, atol=1e-12)


@given(st.integers(2, 30), st.integers(0, 2**31))
def test_pooling_is_permutation_invariant(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 8))
    adj = gen_er(n, 0.3, rng).adjacency
    perm = rng.permutation(n)
    xq = np.empty_like(x)
    xq[perm] = x
    aq = np.zeros_like(adj)
    aq[np.ix_(perm, perm)] = adj
    params = _pool_params()
    xp, ap, c = pool(x, adj, params, 3, 4)
    xp2, ap2, c2 = pool(xq, aq, params, 3, 4)
    assert_allclose(xp2.data, xp.data, atol=1e-10)
    assert_allclose(ap2.data, ap.data, atol=1e-10)
    assert_allclose(c2.data[:, perm], c.data, atol=1e-12)


def test_masked_pool_matches_single():
    rng = np.random.default_rng(3)
    params = _pool_params()
    sizes = [4, 7]
    x = np.zeros((2, 7, 8))
    adj = np.zeros((2, 7, 7))
    mask = np.zeros((2, 7, 1))
    singles = []
    for i, n in enumerate(sizes):
        xi, ai = rng.normal(size=(n, 8)), gen_er(n, 0.5, rng).adjacency
        x[i, :n], adj[i, :n, :n], mask[i, :n] = xi, ai, 1
        singles.append(pool(xi, ai, params, 3, 4))
    xb, ab, cb = pool(x, adj, params, 3, 4, mask=mask)
    for i, n in enumerate(sizes):
        assert_allclose(xb.data[i], singles[i][0].data, atol=1e-12)
        assert_allclose(ab.data[i], singles[i][1].data, atol=1e-12)
        assert_allclose(cb.data[i, :, n:], 0.0)


def test_unknown_pool_norm():
    with pytest.raises(ValueError):
        pool(np.ones((3, 8)), np.zeros((3, 3)), _pool_params(), 3, 4, norm="sparsemax")


# -- matching -------------------------------------------------------------


def test_gat_ignores_non_neighbours():
    rng = np.random.default_rng(0)
    w, a1, a2 = rng.normal(size=(4, 4)), rng.normal(size=(4, 1)), rng.normal(size=(4, 1))
    adj = Graph("p", 4, [(0, 1), (1, 2)]).adjacency
    x = rng.normal(size=(4, 4))
    y = x.copy()
    y[3] += 10.0
    # node 0 sees only itself and node 1
    assert_allclose(gat(x, adj, w, a1, a2).data[:3], gat(y, adj, w, a1, a2).data[:3])


def test_cross_mask_rows_are_distributions():
    rng = np.random.default_rng(1)
    m = cross_mask(rng.normal(size=(3, 5)), rng.normal(size=(6, 5))).data
    assert m.shape == (3, 6)
    assert_allclose(m.sum(axis=1), 1.0)


@pytest.mark.parametrize("flags", [(True, True, True), (True, False, True), (False, False, True),
                                   (True, True, False)])
def test_ablation_flags_change_fusion_width(flags):
    cfg = replace(SMALL, use_x=flags[0], use_i=flags[1], use_m=flags[2])
    m = CoSimModel(cfg)
    assert m.params["match.0.fuse1.w"].shape == (sum(flags) * 8, 8)
    g1, g2 = gen_ba(8, 1, 0, "a"), gen_ba(9, 1, 1, "b")
    assert -1.0 <= m.predict(g1, g2) <= 1.0


# -- model ----------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(use_x=False, use_i=False, use_m=False)
    with pytest.raises(ValueError):
        ModelConfig(encoder="sage")
    with pytest.raises(ValueError):
        ModelConfig(pooling=False, d_pool=32)
    with pytest.raises(ValueError):
        ModelConfig(bn_stats="batch")
    with pytest.raises(ValueError):
        ModelConfig.from_dict({"colour": 1})


def test_score_symmetry_and_identity(graphs):
    m = CoSimModel(SMALL)
    for a, b in zip(graphs, graphs[1:]):
        assert m.predict(a, b) == pytest.approx(m.predict(b, a), abs=1e-12)
        assert m.predict(a, a) == pytest.approx(1.0, abs=1e-12)


def test_forward_pairs_matches_per_pair(graphs):
    m = CoSimModel(SMALL)
    pairs = [(graphs[i], graphs[j]) for i in range(4) for j in range(i, 6)]
    batched = m.predict_pairs(pairs, chunk=5)
    single = np.array([m.predict(a, b) for a, b in pairs])
    assert_allclose(batched, single, atol=1e-12)


def test_train_mode_batched_gradients_match_per_pair(graphs):
    m = CoSimModel(SMALL)
    pairs = [(graphs[0], graphs[1]), (graphs[2], graphs[3])]
    target = np.array([0.3, 0.7])
    with ad.Tape() as tape:
        loss = ad.mse(m.forward_pairs(pairs, train=True, update_stats=False), target)
    gb = tape.backward(loss, m.params)
    with ad.Tape() as tape:
        s = [ad.reshape(m.forward(a, b, train=True), (1,)) for a, b in pairs]
        loss2 = ad.mse(ad.concat_rows([ad.reshape(x, (1, 1)) for x in s]), target.reshape(2, 1))
    gs = tape.backward(loss2, m.params)
    for k in m.params:
        assert_allclose(gb[k], gs[k], atol=1e-10, err_msg=k)


def test_whole_graph_mode_shares_parameters(graphs):
    m = CoSimModel(ModelConfig(d_encode=8, d_pool=8, d_final=8, n_pool=3, h=2))
    whole = m.with_config(pooling=False)
    assert whole.params is m.params
    a, b = graphs[0], graphs[1]
    assert whole.predict(a, b) == pytest.approx(whole.predict(b, a), abs=1e-12)
    x, adj = whole.embed(a)
    assert x.shape == (a.n, 8)


def test_pooled_view_and_precompute(graphs):
    m = CoSimModel(SMALL)
    xp, ap, c = m.pooled(graphs[2])
    assert xp.shape == (3, 8) and ap.shape == (3, 3) and c.shape == (3, graphs[2].n)
    e1, e2 = m.precompute(graphs[2]), m.precompute(graphs[3])
    assert m.score_embedded(e1, e2) == pytest.approx(m.predict(graphs[2], graphs[3]), abs=1e-12)


def test_checkpoint_roundtrip(tmp_path, graphs):
    m = CoSimModel(replace(SMALL, encoder="gcn", seed=5))
    m.forward(graphs[0], graphs[1], train=True)
    save_checkpoint(tmp_path / "m.npz", m, {"note": "x"})
    back, meta = load_checkpoint(tmp_path / "m.npz")
    assert meta == {"note": "x"} and back.cfg == m.cfg
    assert back.predict(graphs[0], graphs[4]) == m.predict(graphs[0], graphs[4])
    for k, v in m.state_arrays().items():
        assert_allclose(back.state_arrays()[k], v)


def test_snapshot_restore_and_clone(graphs):
    m = CoSimModel(SMALL)
    snap = m.snapshot()
    before = m.predict(graphs[0], graphs[1])
    twin = m.clone()
    for p in m.params.values():
        p.data = p.data + 0.1
    assert m.predict(graphs[0], graphs[1]) != before
    assert twin.predict(graphs[0], graphs[1]) == before
    m.restore(snap)
    assert m.predict(graphs[0], graphs[1]) == before


def test_seed_determines_initialization():
    a, b = CoSimModel(SMALL), CoSimModel(SMALL)
    for k in a.params:
        assert_allclose(a.params[k].data, b.params[k].data)
    c = CoSimModel(replace(SMALL, seed=1))
    assert not np.allclose(a.params["pool.w"].data, c.params["pool.w"].data)


def test_constant_features():
    m = CoSimModel(replace(SMALL, features="constant"))
    assert m.params["enc.0.mlp1.w"].shape[0] == 1
    g = gen_ba(6, 1, 0, "a")
    assert m.predict(g, g) == pytest.approx(1.0)


def test_model_gradcheck_small():
    m = CoSimModel(SMALL)
    rng = np.random.default_rng(2)
    g1, g2 = gen_er(5, 0.6, rng, "a"), gen_er(6, 0.5, rng, "b")
    rep = ad.gradcheck(lambda: ad.mse(m.forward(g1, g2), [0.4]), m.params, samples=150)
    assert rep.passed(1e-4), rep
