import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from treeperc.errors import ConstructionError, DomainError, ResourceError
from treeperc.trees import (Cutset, FiniteGraph, TreeSpec, branching_number, build_tree,
                            complete_graph, confluent, cutset_sum, k_fuzz, kfuzz_path,
                            lambda_flow, path_graph)


def binary(depth):
    return build_tree(TreeSpec.d_ary(2), depth)


def test_build_sizes():
    assert binary(0).n_vertices == 1
    t = binary(3)
    assert t.n_vertices == 15
    assert t.level_sizes == (1, 2, 4, 8)
    assert build_tree(TreeSpec.periodic(2), 4).level_sizes == (1, 2, 2, 4, 4)
    assert build_tree(TreeSpec.single_ray(), 5).level_sizes == (1,) * 6


def test_tree_invariants_match_networkx():
    for spec in (TreeSpec.d_ary(3), TreeSpec.periodic(2), TreeSpec.explicit([2, 1, 3, 0, 0, 0, 0])):
        t = build_tree(spec, 3)
        parents = t.parents
        assert parents[0] == -1 and np.all(parents[1:] >= 0)
        levels = t.levels
        assert np.all(levels[parents[1:]] == levels[1:] - 1)
        G = nx.Graph([(int(parents[v]), v) for v in range(1, t.n_vertices)])
        G.add_node(0)
        assert nx.is_tree(G)
        dist = nx.single_source_shortest_path_length(G, 0)
        assert all(dist[v] == levels[v] for v in range(t.n_vertices))
        for v in range(t.n_vertices):
            assert all(t.parent(c) == v for c in t.children(v))


def test_explicit_errors():
    with pytest.raises(ConstructionError):
        TreeSpec.explicit([2, 0])
    with pytest.raises(ConstructionError):
        TreeSpec.explicit([1, -1, 1])
    with pytest.raises(DomainError):
        TreeSpec.d_ary(0)
    with pytest.raises(DomainError):
        TreeSpec.periodic(0)
    with pytest.raises(DomainError):
        build_tree(TreeSpec.d_ary(2), -1)


def test_spec_text_roundtrip():
    for spec in (TreeSpec.d_ary(2), TreeSpec.periodic(3), TreeSpec.single_ray(),
                 TreeSpec.explicit([2, 0, 0])):
        assert TreeSpec.from_text(spec.to_text()) == spec
    assert TreeSpec.from_text("kind=d_ary;d=4") == TreeSpec.d_ary(4)
    with pytest.raises(ConstructionError):
        TreeSpec.from_text("cylinder:3")


def test_confluent_examples():
    t = binary(3)
    assert confluent(t, 1, 2)[0] == 0
    assert confluent(t, 1, 4)[0] == 1
    leaf, cousin = 7, 9  # leftmost depth-3 leaf and a leaf under the other grandchild of 1
    u, path = confluent(t, leaf, cousin)
    # independent answer from networkx's lowest common ancestor
    D = nx.DiGraph([(int(t.parents[v]), v) for v in range(1, t.n_vertices)])
    assert u == nx.lowest_common_ancestor(D, leaf, cousin) == 1
    assert path == [0, 1]
    with pytest.raises(DomainError):
        confluent(t, 0, 99)


@given(st.integers(0, 30), st.integers(0, 30))
def test_confluent_symmetric(v, w):
    t = build_tree(TreeSpec.explicit([3, 2, 0, 2, 1, 2, 0, 0, 0, 1, 0, 0]), 6)
    v %= t.n_vertices
    w %= t.n_vertices
    u, _ = confluent(t, v, w)
    assert u == confluent(t, w, v)[0]
    assert t.level(u) <= min(t.level(v), t.level(w))
    assert t.is_ancestor(u, v) and t.is_ancestor(u, w)


def test_branching_numbers():
    assert branching_number(TreeSpec.single_ray()) == 1
    assert branching_number(TreeSpec.d_ary(2)) == 2
    assert branching_number(TreeSpec.periodic(3)) == pytest.approx(1.259921, abs=1e-6)
    with pytest.raises(DomainError):
        branching_number(TreeSpec.explicit([1, 0]))


def test_lambda_flow_examples():
    t = binary(3)
    f = lambda_flow(t, 2)
    for v in range(t.n_vertices):
        assert f.value(v) == pytest.approx(2.0 ** -t.level(v))
    assert lambda_flow(build_tree(TreeSpec.single_ray(), 5), 1).root_value == 1
    assert lambda_flow(t, 4).root_value == pytest.approx(0.125)
    with pytest.raises(DomainError):
        lambda_flow(t, 0.5)


def _check_flow(t, f):
    for v in range(t.n_vertices):
        kids = list(t.children(v))
        assert 0 <= f.value(v) <= f.lam ** -t.level(v) + 1e-15
        if kids:
            assert f.value(v) == pytest.approx(sum(f.value(c) for c in kids), rel=1e-12, abs=1e-15)


def test_lambda_flow_nonuniform_conservation():
    t = build_tree(TreeSpec.explicit([3, 2, 0, 2, 1, 2, 0, 0, 0, 1, 0, 0]), 6)
    for lam in (1.0, 1.3, 2.0, 3.0):
        _check_flow(t, lambda_flow(t, lam))


def test_flow_root_stays_positive_below_br():
    # d-ary at lambda = d carries the constant 1; periodic at 2**(1/m) stays bounded below
    for depth in (2, 6, 12, 20):
        assert lambda_flow(build_tree(TreeSpec.d_ary(3), depth), 3).root_value == pytest.approx(1)
    roots = [lambda_flow(build_tree(TreeSpec.periodic(3), d), 2 ** (1 / 3)).root_value
             for d in (3, 9, 30, 90)]
    assert min(roots) > 0.5


def test_cutset_sums():
    t = binary(6)
    for n in range(7):
        assert cutset_sum(t, 2, Cutset.at_level(n)) == pytest.approx(1)
        assert cutset_sum(t, 3, Cutset.at_level(n)) == pytest.approx((2 / 3) ** n)
    assert cutset_sum(t, 5, Cutset.of([0])) == 1
    # a mixed cutset: vertex 1 plus the four grandchildren under 2
    assert cutset_sum(t, 2, Cutset.of([1, 5, 6])) == pytest.approx(0.5 + 0.25 + 0.25)
    with pytest.raises(ConstructionError):
        cutset_sum(t, 2, Cutset.of([1]))
    with pytest.raises(ConstructionError):
        cutset_sum(t, 2, Cutset.of([0, 1]))


def test_level_cutsets_decay_above_br():
    for spec, br in ((TreeSpec.d_ary(2), 2.0), (TreeSpec.periodic(3), 2 ** (1 / 3))):
        lam = br * 1.1
        t = build_tree(spec, 60)
        sums = [cutset_sum(t, lam, Cutset.at_level(n)) for n in (20, 40, 60)]
        assert sums[0] > sums[1] > sums[2]
        assert sums[2] < 0.05


def test_deep_tree_is_implicit():
    t = build_tree(TreeSpec.d_ary(2), 40)
    assert t.n_vertices == 2 ** 41 - 1
    assert t.parent(t.vertex(40, 5)) == t.vertex(39, 2)
    with pytest.raises(ResourceError):
        t.parents


def test_kfuzz_examples():
    P3 = path_graph(3)
    assert k_fuzz(P3, 1).edges == P3.edges
    assert k_fuzz(P3, 2).edges == complete_graph(3).edges
    assert k_fuzz(path_graph(6), 7).edges == complete_graph(6).edges
    assert k_fuzz(path_graph(4), 0).edges == frozenset()


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 9), st.floats(0.2, 0.8), st.integers(0, 10**6))
def test_kfuzz_against_networkx_power(n, dens, seed):
    G = nx.gnp_random_graph(n, dens, seed=seed)
    fg = FiniteGraph.from_edges(G.nodes, G.edges)
    prev = frozenset()
    for k in range(1, 5):
        fz = k_fuzz(fg, k)
        expect = {frozenset(e) for e in nx.power(G, k).edges} if G.number_of_edges() else set()
        assert fz.edges == expect
        assert prev <= fz.edges
        prev = fz.edges


def test_kfuzz_path_direct():
    for n, k in itertools.product(range(1, 8), range(0, 4)):
        assert kfuzz_path(n, k).edges == k_fuzz(path_graph(n), k).edges


def test_graph_validation():
    with pytest.raises(ConstructionError):
        FiniteGraph.from_edges([0, 1], [(0, 0)])
    with pytest.raises(ConstructionError):
        FiniteGraph.from_edges([0, 1], [(0, 2)])
    g = FiniteGraph.from_edges([0, 1, 2], [(0, 1), (1, 0)])
    assert len(g.edges) == 1
