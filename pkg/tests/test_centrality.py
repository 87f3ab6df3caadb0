from fractions import Fraction

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from conftest import graph_from_matrix, make_graph
from oracles import (
    betweenness_enumeration,
    floyd_closeness,
    kcore_by_definition,
    local_clustering,
    pagerank_dense,
    random_digraph,
    rwb_absorbing_chain,
)
from tradenet.centrality import (
    CENTRALITY_COLUMNS,
    CentralityTransformer,
    betweenness,
    closeness,
    clustering_coefficient,
    compute_all,
    degree,
    kcore_decomposition,
    pagerank,
    random_walk_betweenness,
    records_frame,
    strength,
)
from tradenet.exceptions import ConvergenceError, ValidationError

CYCLE = [("AAA", "BBB", 1), ("BBB", "CCC", 1), ("CCC", "AAA", 1)]

# Sample network with 8 nodes and 12 edges: a complete four-node core, two
# second-shell nodes and two pendant nodes.
SAMPLE_NODES = ["AAA", "BBB", "CCC", "DDD", "EEE", "FFF", "GGG", "HHH"]
SAMPLE_EDGES = [
    ("AAA", "BBB", 1), ("AAA", "CCC", 1), ("AAA", "DDD", 1),
    ("BBB", "CCC", 1), ("BBB", "DDD", 1), ("CCC", "DDD", 1),
    ("EEE", "AAA", 1), ("EEE", "CCC", 1), ("EEE", "FFF", 1), ("FFF", "BBB", 1),
    ("GGG", "CCC", 1), ("HHH", "DDD", 1),
]
SAMPLE_SHELLS = {"AAA": 3, "BBB": 3, "CCC": 3, "DDD": 3, "EEE": 2, "FFF": 2, "GGG": 1, "HHH": 1}


def star(n_leaves=4):
    return make_graph(
        ["AAA"] + [f"L{i:02d}" for i in range(n_leaves)],
        [("AAA", f"L{i:02d}", 1) for i in range(n_leaves)],
    )


def path3(directed=True):
    return make_graph(["AAA", "BBB", "CCC"], [("AAA", "BBB", 1), ("BBB", "CCC", 1)])


def test_degree_examples():
    g = make_graph(["AAA", "BBB", "CCC"], CYCLE)
    assert degree(g, "in") == degree(g, "out") == {"AAA": 1, "BBB": 1, "CCC": 1}
    s = star()
    assert degree(s, "out")["AAA"] == 4
    assert all(degree(s, "in")[c] == 1 and degree(s, "out")[c] == 0 for c in s.nodes[1:])
    empty = make_graph(["AAA", "BBB"], [])
    assert set(degree(empty).values()) == {0}
    with pytest.raises(ValidationError):
        degree(g, "both")


def test_strength_examples():
    g = make_graph(["AAA", "BBB", "CCC"], [("AAA", "BBB", 5), ("AAA", "CCC", 7)])
    assert strength(g, "out")["AAA"] == 12
    assert strength(g, "in")["BBB"] == 5


def test_strength_matches_raw_sums():
    rng = np.random.default_rng(3)
    w = random_digraph(rng, 10)
    g = graph_from_matrix(w)
    s_in = np.array(list(strength(g, "in").values()))
    s_out = np.array(list(strength(g, "out").values()))
    assert_array_equal(s_in, [sum(w[j, i] for j in range(10)) for i in range(10)])
    assert_array_equal(s_out, [sum(w[i, j] for j in range(10)) for i in range(10)])
    assert s_in.sum() == s_out.sum() == w.sum()


@pytest.mark.parametrize(
    "edges, expected",
    [
        ([("AAA", "BBB", 1), ("BBB", "AAA", 1)], [0.5, 0.5]),
        ([("AAA", "BBB", 1)], [0.35 / 0.9975, 1 - 0.35 / 0.9975]),
    ],
)
def test_pagerank_two_nodes(edges, expected):
    pr = pagerank(make_graph(["AAA", "BBB"], edges))
    assert_allclose(list(pr.values()), expected, atol=1e-12)


def test_pagerank_dangling_hand_values():
    pr = pagerank(make_graph(["AAA", "BBB"], [("AAA", "BBB", 1)]))
    assert round(pr["AAA"], 5) == 0.35088
    assert round(pr["BBB"], 5) == 0.64912


def test_pagerank_cycle_and_isolated_node():
    pr = pagerank(make_graph(["AAA", "BBB", "CCC"], CYCLE))
    assert_allclose(list(pr.values()), [1 / 3] * 3, atol=1e-12)
    # isolated node: rank (1-d)/N + d * dangling share; solved by hand
    pr = pagerank(make_graph(["AAA", "BBB", "CCC", "DDD"], CYCLE))
    assert_allclose(pr["DDD"], 0.15 / 4 / (1 - 0.85 / 4), rtol=1e-10)
    assert_allclose(pr["AAA"], (1 - pr["DDD"]) / 3, rtol=1e-10)


def test_pagerank_errors():
    g = make_graph(["AAA", "BBB"], [("AAA", "BBB", 1)])
    with pytest.raises(ValidationError):
        pagerank(g, d=1.0)
    with pytest.raises(ValidationError):
        pagerank(g, tol=0)
    with pytest.raises(ValidationError):
        pagerank(g, mode="hits")
    with pytest.raises(ConvergenceError) as info:
        pagerank(g, max_iter=2)
    assert info.value.residual > 0


@pytest.mark.parametrize("mode", ["weighted", "binary"])
def test_pagerank_matches_dense_solve_and_networkx(mode):
    rng = np.random.default_rng(11)
    for _ in range(20):
        w = random_digraph(rng, int(rng.integers(2, 12)))
        g = graph_from_matrix(w)
        pr = np.array(list(pagerank(g, mode=mode).values()))
        assert_allclose(pr, pagerank_dense(w, binary=mode == "binary"), atol=1e-10)
        G = nx.from_numpy_array(w if mode == "weighted" else (w > 0).astype(float), create_using=nx.DiGraph)
        ref = nx.pagerank(G, alpha=0.85, tol=1e-14, max_iter=10000)
        assert_allclose(pr, [ref[i] for i in range(w.shape[0])], atol=1e-9)
        assert abs(pr.sum() - 1) < 1e-12
        assert pr.min() >= 0.15 / len(pr) - 1e-12


def test_clustering_examples():
    g = make_graph(["AAA", "BBB", "CCC"], CYCLE)
    assert set(clustering_coefficient(g).values()) == {1.0}
    assert set(clustering_coefficient(star(3)).values()) == {0.0}
    g = make_graph(
        ["AAA", "BBB", "CCC", "DDD"],
        [("AAA", "BBB", 1), ("AAA", "CCC", 1), ("AAA", "DDD", 1), ("BBB", "CCC", 1)],
    )
    assert clustering_coefficient(g)["AAA"] == pytest.approx(1 / 3, abs=1e-15)


def test_closeness_examples():
    assert closeness(star(3))["AAA"] == 1.0
    c = closeness(path3())
    assert c["AAA"] == pytest.approx(2 / 3, abs=1e-15)
    assert c["BBB"] == 1.0
    iso = make_graph(["AAA", "BBB", "CCC"], [("AAA", "BBB", 1)])
    assert closeness(iso)["CCC"] == 0.0


def test_betweenness_examples():
    b = betweenness(path3())
    assert b == {"AAA": 0.0, "BBB": 1.0, "CCC": 0.0}
    assert betweenness(path3(), normalized=True)["BBB"] == 0.5
    nodes = ["AAA", "BBB", "CCC", "DDD"]
    complete = make_graph(nodes, [(a, c, 1) for a in nodes for c in nodes if a != c])
    assert set(betweenness(complete).values()) == {0.0}


def test_rwb_examples():
    k3 = make_graph(["AAA", "BBB", "CCC"], CYCLE)
    v = list(random_walk_betweenness(k3).values())
    assert v[0] == v[1] == v[2]
    r = random_walk_betweenness(path3())
    assert r["BBB"] > r["AAA"] == r["CCC"]
    assert r["BBB"] == pytest.approx(1 / 3, abs=1e-15)
    assert set(random_walk_betweenness(make_graph(["AAA", "BBB"], [("AAA", "BBB", 1)])).values()) == {0.0}


def test_rwb_cut_vertex_lower_bound():
    # two triangles joined through a cut vertex: components of sizes p=q=2 on either side
    g = make_graph(
        ["AAA", "BBB", "CCC", "DDD", "EEE"],
        [("AAA", "BBB", 1), ("AAA", "CCC", 1), ("BBB", "CCC", 1), ("CCC", "DDD", 1), ("CCC", "EEE", 1), ("DDD", "EEE", 1)],
    )
    assert random_walk_betweenness(g)["CCC"] >= 4 / 10


def test_kcore_sample_network():
    g = make_graph(SAMPLE_NODES, SAMPLE_EDGES)
    assert g.n_edges == 12
    shells = kcore_decomposition(g)
    assert shells == SAMPLE_SHELLS
    assert max(shells.values()) == 3


def test_kcore_examples():
    assert set(kcore_decomposition(make_graph(["AAA", "BBB", "CCC"], CYCLE)).values()) == {2}
    assert set(kcore_decomposition(star()).values()) == {1}
    assert set(kcore_decomposition(make_graph(["AAA", "BBB"], [])).values()) == {0}


def test_oracles_on_random_digraphs():
    rng = np.random.default_rng(2024)
    for _ in range(40):
        n = int(rng.integers(2, 9))
        w = random_digraph(rng, n)
        g = graph_from_matrix(w)
        a = (w > 0)
        u = (a | a.T).astype(float)
        exact = betweenness_enumeration(a)
        assert list(betweenness(g).values()) == [float(x) for x in exact]
        assert_allclose(list(random_walk_betweenness(g).values()), rwb_absorbing_chain(u), atol=1e-12)
        assert_allclose(list(closeness(g).values()), floyd_closeness(u), atol=1e-14)
        assert_allclose(list(clustering_coefficient(g).values()), local_clustering(u), atol=1e-15)
        assert_array_equal(list(kcore_decomposition(g).values()), kcore_by_definition(u))


def test_cross_check_with_networkx():
    rng = np.random.default_rng(5)
    for _ in range(15):
        n = int(rng.integers(3, 15))
        w = random_digraph(rng, n)
        g = graph_from_matrix(w)
        D = nx.from_numpy_array((w > 0).astype(int), create_using=nx.DiGraph)
        U = D.to_undirected()
        nb = nx.betweenness_centrality(D, normalized=False)
        assert_allclose(list(betweenness(g).values()), [nb[i] for i in range(n)], atol=1e-12)
        cl = nx.closeness_centrality(U)
        assert_allclose(list(closeness(g).values()), [cl[i] for i in range(n)], atol=1e-14)
        kc = nx.core_number(U)
        assert list(kcore_decomposition(g).values()) == [kc[i] for i in range(n)]
        cc = nx.clustering(U)
        assert_allclose(list(clustering_coefficient(g).values()), [cc[i] for i in range(n)], atol=1e-15)
        if nx.is_connected(U):
            cf = nx.current_flow_betweenness_centrality(U, normalized=False)
            rwb = np.array(list(random_walk_betweenness(g).values())) * n * (n - 1) / 2
            assert_allclose(rwb, [cf[i] for i in range(n)], atol=1e-10)


def test_betweenness_is_exact_rational():
    # a graph with many tied geodesics
    w = np.zeros((7, 7))
    for i, j in [(0, 1), (0, 2), (0, 3), (1, 4), (2, 4), (3, 4), (1, 5), (2, 5), (4, 6), (5, 6), (3, 6)]:
        w[i, j] = 1
    exact = betweenness_enumeration(w > 0)
    got = list(betweenness(graph_from_matrix(w)).values())
    assert [Fraction(x) for x in got] == [Fraction(float(x)) for x in exact]


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 30), st.floats(0.05, 0.9), st.integers(0, 2**32 - 1))
def test_kcore_invariants(n, p, seed):
    rng = np.random.default_rng(seed)
    g = graph_from_matrix(random_digraph(rng, n, p))
    u = g.undirected()
    shells = np.array(list(kcore_decomposition(g).values()))
    deg = u.sum(axis=1)
    assert np.all(shells <= deg)
    for k in range(1, shells.max() + 1):
        keep = shells >= k
        assert u[np.ix_(keep, keep)].sum(axis=1).min() >= k


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 9), st.integers(0, 2**32 - 1))
def test_record_invariants_and_relabelling(n, seed):
    rng = np.random.default_rng(seed)
    w = random_digraph(rng, n)
    recs = records_frame(compute_all(graph_from_matrix(w)))
    assert abs(recs["pagerank"].sum() - 1) < 1e-9
    assert (recs["pagerank"] >= 0.15 / n - 1e-12).all()
    assert recs["closeness"].between(0, 1).all() and recs["clustering"].between(0, 1).all()
    perm = rng.permutation(n)
    recs_p = records_frame(compute_all(graph_from_matrix(w[np.ix_(perm, perm)])))
    cols = [c for c in CENTRALITY_COLUMNS if c not in ("country", "year")]
    assert_allclose(recs_p[cols].to_numpy(), recs[cols].to_numpy()[perm], atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 9), st.integers(1, 10**4), st.integers(0, 2**32 - 1))
def test_weight_scaling_invariance(n, c, seed):
    rng = np.random.default_rng(seed)
    w = random_digraph(rng, n)
    base = records_frame(compute_all(graph_from_matrix(w)))
    scaled = records_frame(compute_all(graph_from_matrix(w * c)))
    unweighted = ["k_in", "k_out", "betweenness", "betweenness_norm", "rwb", "closeness", "clustering", "kcore"]
    assert_array_equal(base[unweighted], scaled[unweighted])
    assert_allclose(base["pagerank"], scaled["pagerank"], rtol=1e-12)
    assert_array_equal(base["s_out"] * c, scaled["s_out"])


def test_tree_leaves_have_zero_betweenness_and_clustering():
    g = make_graph(
        ["AAA", "BBB", "CCC", "DDD", "EEE"],
        [("AAA", "BBB", 1), ("BBB", "AAA", 1), ("BBB", "CCC", 1), ("CCC", "BBB", 1), ("BBB", "DDD", 1), ("DDD", "EEE", 1)],
    )
    b = betweenness(g)
    assert b["AAA"] == b["EEE"] == 0.0
    assert set(clustering_coefficient(g).values()) == {0.0}


def test_compute_all_records():
    g = make_graph(["AAA", "BBB", "CCC", "DDD"], CYCLE)
    recs = compute_all(g)
    assert [r.country for r in recs] == ["AAA", "BBB", "CCC", "DDD"]
    d = recs[3]
    assert (d.k_in, d.k_out, d.s_in, d.s_out, d.betweenness, d.rwb, d.closeness, d.clustering, d.kcore) == (0, 0, 0, 0, 0, 0, 0, 0, 0)
    assert d.pagerank == pytest.approx(0.15 / 4 / (1 - 0.85 / 4), rel=1e-10)
    assert compute_all(g) == recs


def test_transformer_outputs_long_frame():
    g1 = make_graph(["AAA", "BBB", "CCC"], CYCLE, year=2000)
    g2 = make_graph(["AAA", "BBB", "CCC"], CYCLE[:2], year=2001)
    frame = CentralityTransformer(pagerank_mode="binary").fit_transform([g1, g2])
    assert list(frame.columns) == list(CENTRALITY_COLUMNS)
    assert frame["year"].tolist() == [2000] * 3 + [2001] * 3
