import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from cosim.ged import (BudgetExceeded, EditCostModel, GedBound, assignment_ged, beam_ged,
                       build_cost_matrix, compute_ged, exact_ged, get_backend, solve_assignment)
from cosim.ged.assignment import InfeasibleAssignment
from cosim.graph import Graph, permute

from .conftest import random_graph


def brute_force_ged(g1: Graph, g2: Graph, labels=False) -> int:
    """Enumerate every injective partial map V1 -> V2 (unit costs)."""
    a1, a2 = g1.adjacency, g2.adjacency
    l1 = g1.node_labels or (None,) * g1.n
    l2 = g2.node_labels or (None,) * g2.n
    best = None
    targets = list(range(g2.n)) + [None] * g1.n
    for f in set(itertools.permutations(targets, g1.n)):
        image = {v for v in f if v is not None}
        cost = (g1.n - len(image)) + (g2.n - len(image))
        cost += sum(1 for u, v in enumerate(f) if v is not None and labels and l1[u] != l2[v])
        for u, w in itertools.combinations(range(g1.n), 2):
            e1 = a1[u, w] > 0
            if f[u] is None or f[w] is None:
                cost += e1
            else:
                cost += e1 != (a2[f[u], f[w]] > 0)
        cost += sum(1 for x, y in g2.edges if x not in image or y not in image)
        best = cost if best is None else min(best, cost)
    return best


@given(st.integers(0, 2**32 - 1))
def test_exact_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    g1, g2 = random_graph(rng, 4, gid="a"), random_graph(rng, 4, gid="b")
    assert exact_ged(g1, g2).value == brute_force_ged(g1, g2)


def test_exact_with_labels_matches_brute_force():
    rng = np.random.default_rng(3)
    for _ in range(15):
        g1, g2 = random_graph(rng, 4, gid="a"), random_graph(rng, 4, gid="b")
        g1 = g1.replace(node_labels=rng.integers(0, 2, g1.n).tolist())
        g2 = g2.replace(node_labels=rng.integers(0, 2, g2.n).tolist())
        assert exact_ged(g1, g2).value == brute_force_ged(g1, g2, labels=True)


def test_exact_matches_networkx():
    nx = pytest.importorskip("networkx")
    rng = np.random.default_rng(11)
    for _ in range(10):
        g1, g2 = random_graph(rng, 5, gid="a"), random_graph(rng, 5, gid="b")
        n1, n2 = nx.Graph(), nx.Graph()
        n1.add_nodes_from(range(g1.n))
        n1.add_edges_from(g1.edges)
        n2.add_nodes_from(range(g2.n))
        n2.add_edges_from(g2.edges)
        assert exact_ged(g1, g2).value == nx.graph_edit_distance(n1, n2)


def test_known_values(path4, triangle):
    assert exact_ged(path4, path4).value == 0
    # delete one node and its edge, then close the triangle
    assert exact_ged(path4, triangle).value == 3
    assert exact_ged(Graph("e", 1, []), Graph("f", 3, [])).value == 2


def test_exact_budget():
    big = Graph("big", 9, [])
    with pytest.raises(BudgetExceeded):
        exact_ged(big, big)


@given(st.integers(0, 2**32 - 1))
def test_bounds_are_sound_and_symmetric(seed):
    rng = np.random.default_rng(seed)
    g1, g2 = random_graph(rng, 6, gid="a"), random_graph(rng, 6, gid="b")
    exact = exact_ged(g1, g2)
    assert exact.kind == "exact" and exact.algorithm == "oracle"
    for algo in ("beam", "hungarian", "vj"):
        b = compute_ged(g1, g2, algo, beam_width=5)
        assert b.value >= exact.value
        assert b.value == compute_ged(g2, g1, algo, beam_width=5).value
    assert beam_ged(g1, g2, width=None).value == exact.value


def test_unbounded_beam_certifies_exact(path4, triangle):
    b = beam_ged(path4, triangle, width=None)
    assert b.kind == "exact" and b.meta["width"] == "unbounded"
    assert beam_ged(path4, triangle, width=3).kind == "upper"
    with pytest.raises(ValueError):
        beam_ged(path4, triangle, width=0)


def test_beam_width_monotone():
    rng = np.random.default_rng(8)
    for _ in range(10):
        g1, g2 = random_graph(rng, 7, gid="a"), random_graph(rng, 7, gid="b")
        vals = [beam_ged(g1, g2, width=w).value for w in (1, 3, 10, 50)]
        assert all(x >= y for x, y in zip(vals, vals[1:]))


def test_identity_pairs_are_zero():
    rng = np.random.default_rng(1)
    for _ in range(5):
        g = random_graph(rng, 20, gid="a")
        for algo in ("beam", "hungarian", "vj"):
            assert compute_ged(g, g.replace(id="b"), algo).value == 0


def test_permutation_invariance_of_bounds():
    rng = np.random.default_rng(2)
    g1, g2 = random_graph(rng, 7, gid="a"), random_graph(rng, 7, gid="b")
    h = permute(g2, rng.permutation(g2.n))
    assert exact_ged(g1, g2).value == exact_ged(g1, h).value


def test_asymmetric_costs_match_reversal():
    rng = np.random.default_rng(4)
    cost = EditCostModel(node_ins=2.0, node_del=1.0, edge_ins=0.5, edge_del=1.5)
    for _ in range(8):
        g1, g2 = random_graph(rng, 5, gid="a"), random_graph(rng, 5, gid="b")
        v = exact_ged(g1, g2, cost).value
        assert v == pytest.approx(exact_ged(g2, g1, cost.reversed()).value)
        assert compute_ged(g1, g2, "hungarian", cost).value >= v - 1e-9
        assert compute_ged(g1, g2, "beam", cost).value >= v - 1e-9


def test_negative_cost_rejected():
    with pytest.raises(ValueError):
        EditCostModel(node_ins=-1)


def test_gedbound_validation():
    with pytest.raises(ValueError):
        GedBound(1.0, "exact", "hungarian")
    with pytest.raises(ValueError):
        GedBound(1.0, "lower", "beam")
    with pytest.raises(ValueError):
        compute_ged(Graph("a", 1, []), Graph("b", 1, []), "astar")


def test_cost_matrix_layout(path4, triangle):
    c = build_cost_matrix(path4, triangle)
    assert c.shape == (7, 7)
    assert_allclose(c[0, :3], [0.5, 0.5, 0.5])
    assert_allclose(c[4:, 3:], 0.0)
    big = c[0, 4]
    assert big > c[np.isfinite(c) & (c < big)].sum() / 2


@pytest.mark.parametrize("backend", ["python", "cython"])
def test_backends_agree_on_beam_and_assignment(backend):
    try:
        get_backend(backend)
    except ImportError:
        pytest.skip("compiled backend not built")
    rng = np.random.default_rng(6)
    for _ in range(10):
        g1, g2 = random_graph(rng, 15, gid="a"), random_graph(rng, 15, gid="b")
        ref = beam_ged(g1, g2, width=8, backend="python").value
        assert beam_ged(g1, g2, width=8, backend=backend).value == ref
        for m in ("hungarian", "vj"):
            assert assignment_ged(g1, g2, method=m, backend=backend).value == \
                assignment_ged(g1, g2, method=m, backend="python").value


def test_infeasible_assignment_detected():
    c = np.array([[np.inf, np.inf], [1.0, 2.0]])
    with pytest.raises(InfeasibleAssignment):
        solve_assignment(c)
    with pytest.raises(ValueError):
        solve_assignment(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        solve_assignment(np.array([[np.nan]]))
