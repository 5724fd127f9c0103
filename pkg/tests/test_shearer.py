import itertools
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from treeperc import shearer as S
from treeperc.errors import ConditioningError, DomainError, ResourceError
from treeperc.trees import FiniteGraph, complete_graph, kfuzz_path, path_graph


def enum_critical(G, p):
    """Sum of (-q)^|T| over independent sets, by listing every subset."""
    q = 1 - p
    vs = list(G.vertices)
    total = 0.0
    for r in range(len(vs) + 1):
        for T in itertools.combinations(vs, r):
            if G.is_independent(T):
                total += (-q) ** r
    return total


def random_graph(n, dens, seed):
    g = nx.gnp_random_graph(n, dens, seed=seed)
    return FiniteGraph.from_edges(g.nodes, g.edges)


def test_critical_function_examples():
    assert S.critical_function(path_graph(1), 0.7) == pytest.approx(0.7, abs=1e-15)
    assert S.critical_function(path_graph(2), 0.7) == pytest.approx(0.4, abs=1e-15)
    assert S.critical_function(path_graph(3), 0.75) == pytest.approx(0.3125, abs=1e-15)
    # signed regime is allowed
    assert S.critical_function(complete_graph(3), 0.5) == pytest.approx(-0.5)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 9), st.floats(0.1, 0.9), st.integers(0, 10**6))
def test_recursion_matches_enumeration(n, dens, seed):
    G = random_graph(n, dens, seed)
    for p in np.arange(0.1, 0.95, 0.1):
        assert S.critical_function(G, p) == pytest.approx(enum_critical(G, p), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 9), st.floats(0.1, 0.9), st.integers(0, 10**6), st.floats(0.05, 0.95))
def test_fundamental_identity(n, dens, seed, p):
    G = random_graph(n, dens, seed)
    rng = np.random.default_rng(seed)
    v = int(rng.integers(n))
    W = [u for u in range(n) if u != v and rng.random() < 0.6]
    adj = G.adjacency()
    lhs = S.critical_function(G.induced(W + [v]), p)
    rhs = S.critical_function(G.induced(W), p) - (1 - p) * S.critical_function(
        G.induced([u for u in W if u not in adj[v]]), p)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_table_matches_induced_subgraphs():
    G = random_graph(7, 0.4, 3)
    tab = S.critical_function_table(G, 0.8)
    for mask in range(1 << 7):
        W = [i for i in range(7) if mask >> i & 1]
        assert tab[mask] == pytest.approx(S.critical_function(G.induced(W), 0.8), abs=1e-13)


def test_graph_cap():
    with pytest.raises(ResourceError):
        S.critical_function(path_graph(30), 0.9)


def test_event_probabilities():
    K2 = path_graph(2)
    assert S.shearer_event_prob(K2, 0.7, []) == pytest.approx(0.4)
    assert S.shearer_event_prob(K2, 0.7, [0]) == pytest.approx(0.3)
    assert S.shearer_event_prob(K2, 0.7, [0, 1]) == 0
    with pytest.raises(DomainError):
        S.shearer_event_prob(K2, 0.7, [5])


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 10), st.floats(0.1, 0.9), st.integers(0, 10**6), st.floats(0.0, 1.0))
def test_event_probabilities_sum_to_one(n, dens, seed, p):
    G = random_graph(n, dens, seed)
    total = sum(S.shearer_event_prob(G, p, B)
                for r in range(n + 1) for B in itertools.combinations(range(n), r))
    assert total == pytest.approx(1.0, abs=1e-10)
    dist = S.shearer_distribution(G, p)
    assert dist.sum() == pytest.approx(1.0, abs=1e-10)


def test_p_shearer_graph():
    assert S.p_shearer_graph(path_graph(1)) == 0
    assert S.p_shearer_graph(path_graph(2)) == pytest.approx(0.5, abs=1e-12)
    assert S.p_shearer_graph(complete_graph(3)) == pytest.approx(2 / 3, abs=1e-12)
    assert S.p_shearer_graph(FiniteGraph.from_edges(range(4), [])) == 0


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 10), st.floats(0.2, 0.9), st.integers(0, 10**6))
def test_critical_function_vanishes_at_p_sh(n, dens, seed):
    G = random_graph(n, dens, seed)
    if not G.edges:
        return
    psh = S.p_shearer_graph(G)
    assert abs(S.critical_function(G, psh)) < 1e-10
    # nonnegative (and strictly positive) just above it
    assert S.critical_function(G, min(1.0, psh + 1e-6)) > 0


def test_b_sequence_examples():
    s = S.b_sequence(1, 0.75, 4)
    assert np.allclose(s.b, [0.75, 0.5, 0.3125, 0.1875], atol=1e-15)
    s0 = S.b_sequence(0, 0.6, 8)
    assert np.allclose(s0.b, 0.6 ** np.arange(1, 9), rtol=1e-13)
    s = S.b_sequence(1, 0.6, 3)
    assert s.b[2] == pytest.approx(-0.04, abs=1e-15)
    assert s.first_nonpositive_index == 3


def test_b_sequence_matches_critical_function():
    for k in range(4):
        for p in (0.55, 0.75, 0.9, 0.97):
            s = S.b_sequence(k, p, 12)
            for n in range(1, 13):
                assert s.b[n - 1] == pytest.approx(S.critical_function(kfuzz_path(n, k), p), abs=1e-12)


def test_b_sequence_head_and_beta():
    s = S.b_sequence(2, 0.9, 50)
    q = 0.1
    assert np.allclose(s.b[:3], 1 - q * np.arange(1, 4))
    assert s.beta[0] == pytest.approx(s.b[0])
    assert np.allclose(s.beta[1:], s.b[1:] / s.b[:-1])
    assert np.all(np.diff(s.beta) < 0) or np.all(np.diff(s.beta) <= 1e-16)


def test_p_shearer_line_examples():
    assert S.p_shearer_line(1, 2) == pytest.approx(0.5, abs=1e-12)
    assert S.p_shearer_line(2, 3) == pytest.approx(2 / 3, abs=1e-12)
    # the k=1 finite-line threshold has the closed form 1 - 1/(4 cos^2(pi/(N+2)))
    for N in (3, 10, 57, 200):
        closed = 1 - 1 / (4 * math.cos(math.pi / (N + 2)) ** 2)
        assert S.p_shearer_line(1, N) == pytest.approx(closed, abs=1e-11)


def test_p_shearer_line_equals_graph_value():
    for k in (1, 2, 3):
        for N in (2, 4, 7, 11):
            assert S.p_shearer_line(k, N) == pytest.approx(S.p_shearer_graph(kfuzz_path(N, k)), abs=1e-10)


def test_p_shearer_line_increasing():
    for k in (1, 2, 3):
        vals = [S.p_shearer_line(k, N) for N in range(2, 60)]
        assert np.all(np.diff(vals) > 0)
        assert vals[-1] < S.p_shearer_kfuzz(k)


def test_p_shearer_kfuzz():
    assert S.p_shearer_kfuzz(0) == 0
    assert S.p_shearer_kfuzz(1) == 0.75
    assert S.p_shearer_kfuzz(2) == pytest.approx(23 / 27, abs=1e-15)


def test_xi():
    assert S.xi(0, 0.37).xi == 0.37
    assert S.xi(1, 0.75).xi == pytest.approx(0.5, abs=1e-12)
    assert S.xi(1, 0.8).xi == pytest.approx((1 + math.sqrt(0.2)) / 2, abs=1e-12)
    with pytest.raises(DomainError) as err:
        S.xi(1, 0.7)
    assert "0.75" in str(err.value.threshold)


@given(st.integers(1, 6), st.floats(0.0, 1.0))
def test_xi_solves_equation(k, t):
    p = S.p_shearer_kfuzz(k) + t * (1 - S.p_shearer_kfuzz(k))
    x = S.xi(k, p).xi
    assert k / (k + 1) - 1e-12 <= x <= 1
    assert S.curve_hk(k, x) == pytest.approx(1 - p, abs=1e-12)


def test_curves():
    assert S.curve_hk(1, 0.5) == 0.25
    for k in range(6):
        assert S.curve_gk(k, 1.0) == 1.0
    assert S.curve_fk(1, 0.5, 1) == 0
    assert S.curve_fk(3, 0.8, 0) == 0.8
    with pytest.raises(DomainError):
        S.curve_fk(1, 0.5, 2)
    with pytest.raises(DomainError):
        S.curve_gk(1, 0.5)


def test_gk_of_inverse_xi_is_p():
    for k in (1, 2, 3):
        for p in (S.p_shearer_kfuzz(k), 0.9, 0.99):
            x = S.xi(k, p).xi
            assert S.curve_gk(k, 1 / x) == pytest.approx(p, abs=1e-12)


def test_minoration_fk():
    assert S.minoration_fk(1, 0.8, [5, -7]) == pytest.approx(S.xi(1, 0.8).xi)
    assert S.minoration_fk(1, 0.75, [1]) == pytest.approx(0, abs=1e-12)
    x = S.xi(1, 0.8).xi
    assert S.minoration_fk(1, 0.8, [1]) == pytest.approx((2 * x - 1) / x)
    assert S.minoration_fk(1, 0.8, [1]) == pytest.approx(0.618034, abs=1e-6)
    with pytest.raises(DomainError):
        S.minoration_fk(1, 0.8, [0, 2])


def test_minoration_bounds_line_conditional():
    # on a long segment, the conditional of a middle 1 given ones on B is at least f_k(g_B)
    from treeperc import line
    for k, p in ((1, 0.8), (2, 0.9)):
        law = line.make_law("shearer_factor", k=k, p=p)
        mid = 6
        for B in ([mid + 1], [mid - 1, mid + 1], [mid - 2, mid + 3], [mid + 4]):
            pat = [None] * 12
            for b in B:
                pat[b] = 1
            den = line.pattern_prob(law, pat)
            pat[mid] = 1
            cond = line.pattern_prob(law, pat) / den
            assert cond >= S.minoration_fk(k, p, [b - mid for b in B]) - 1e-12


def test_shearer_conditional():
    P3 = path_graph(3)
    assert S.shearer_conditional(P3, 0.75, [0, 1, 2], [0, 1, 2]) == pytest.approx(1)
    assert S.shearer_conditional(P3, 0.75, [0, 1, 2], [0, 1]) == pytest.approx(0.625)
    g = FiniteGraph.from_edges(range(3), [(0, 1)])
    assert S.shearer_conditional(g, 0.8, [0, 1, 2], [0, 1]) == pytest.approx(0.8)
    with pytest.raises(ConditioningError):
        S.shearer_conditional(complete_graph(3), 0.6, [0, 1, 2], [0, 1, 2])


def test_majorations_and_minorations_long_range():
    for k in (1, 2):
        for p in (S.p_shearer_kfuzz(k), 0.95):
            s = S.b_sequence(k, p, 10_000)
            x = S.xi(k, p).xi
            n = np.arange(1, 10_001)
            assert np.all(s.log_b >= n * np.log(x) - 1e-9)
            C = S.majoration_witness(k, p, 0.01, 10_000)
            assert np.all(s.log_b <= math.log(C) + n * math.log(1.01 * x) + 1e-12)
