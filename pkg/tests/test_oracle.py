import random

import numpy as np
from hypothesis import given, settings, strategies as st
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from equideco.conditions import SiteFunction
from equideco.lattice import make_ambient
from equideco.oracle import (CapGraph, equidecomposable_oracle, flow_feasibility_oracle,
                             hall_feasible_oracle, max_bipartite_matching)
from equideco.real_flow import build_real_flow

from gen import hall_safe_function


def test_hall_oracle_examples():
    t = make_ambient("torus", (6, 6))
    A = [(0, 0), (3, 3)]
    assert hall_feasible_oracle(t, A, A, 1)
    assert not hall_feasible_oracle(t, A + [(1, 4)], A, 5)


def test_equidecomposable_oracle_examples():
    t = make_ambient("torus", (6, 6))
    A = [(0, 0), (2, 3), (4, 1)]
    B = [((x + 1) % 6, y) for x, y in A]
    assert equidecomposable_oracle(t, A, B, 1)
    assert not equidecomposable_oracle(t, A, B, 0)
    z = make_ambient("torus", (4,), (2,))
    A = [(0, 0), (1, 0)]
    assert not equidecomposable_oracle(z, A, [(0, 1), (1, 1)], 0)
    assert equidecomposable_oracle(z, A, A, 0)


def test_flow_oracle_examples():
    t = make_ambient("torus", (4, 4))
    assert flow_feasibility_oracle(t, {}, 0)
    assert not flow_feasibility_oracle(t, {(0, 0): 1}, 100)
    # integer capacities: half a unit per edge is as good as none
    assert flow_feasibility_oracle(t, {(0, 0): 1, (1, 0): -1}, 1)
    assert not flow_feasibility_oracle(t, {(0, 0): 1, (1, 0): -1}, 0.5)
    # four units out of one site use all four incident edges; a fifth cannot leave
    f = {(0, 0): 4, (1, 0): -1, (3, 0): -1, (0, 1): -1, (0, 3): -1}
    assert flow_feasibility_oracle(t, f, 1)
    f[(0, 0)], f[(2, 2)] = 5, -1
    assert not flow_feasibility_oracle(t, f, 1)
    assert flow_feasibility_oracle(t, f, 2)


def test_real_flow_bound_is_feasible_per_oracle():
    rng = random.Random(9)
    t = make_ambient("torus", (8, 8))
    for k in (1, 2):
        for l in (1, 2):
            f = hall_safe_function(t, rng, k, l, 0.4)
            phi, rep = build_real_flow(f, k)
            assert not rep.mismatch_sites
            assert flow_feasibility_oracle(t, f.values, l * 2 ** k)
            assert flow_feasibility_oracle(t, f.values, phi.sup_norm())


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 9), st.lists(st.tuples(st.integers(0, 8), st.integers(0, 8),
                                             st.integers(0, 5)), max_size=30))
def test_max_flow_equals_min_cut(n, arcs):
    g = CapGraph(n)
    kept = []
    for u, v, c in arcs:
        u, v = u % n, v % n
        if u != v:
            g.add_arc(u, v, c)
            kept.append((u, v, c))
    value = g.max_flow(0, n - 1)
    side = g.reachable(0)
    assert n - 1 not in side
    assert value == sum(c for u, v, c in kept if u in side and v not in side)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.data())
def test_matching_size_matches_scipy(nl, nr, data):
    edges = data.draw(st.sets(st.tuples(st.integers(0, nl - 1), st.integers(0, nr - 1))))
    adj = {u: sorted(v for uu, v in edges if uu == u) for u in range(nl)}
    m = max_bipartite_matching(list(range(nl)), adj)
    assert len(set(m.values())) == len(m)
    assert all(v in adj[u] for u, v in m.items())
    rows = [u for u, _ in sorted(edges)]
    cols = [v for _, v in sorted(edges)]
    graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(nl, nr))
    ref = maximum_bipartite_matching(graph, perm_type="column")
    assert len(m) == int((ref >= 0).sum())


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_oracles_invariant_under_symmetries(data):
    t = make_ambient("torus", (6, 6))
    pts = sorted(t.points())
    A = data.draw(st.lists(st.sampled_from(pts), unique=True, max_size=8))
    B = data.draw(st.lists(st.sampled_from(pts), unique=True, max_size=8))
    k = data.draw(st.integers(0, 3))
    sx, sy = data.draw(st.integers(0, 5)), data.draw(st.integers(0, 5))

    def move(S):
        # translate, then swap and reflect the axes: all graph automorphisms
        return [((-(y + sy)) % 6, (x + sx) % 6) for x, y in S]

    assert hall_feasible_oracle(t, A, B, k) == hall_feasible_oracle(t, move(A), move(B), k)
    assert equidecomposable_oracle(t, A, B, k) == equidecomposable_oracle(t, move(A), move(B), k)
    f = SiteFunction.from_sets(t, A, B).values
    g = SiteFunction.from_sets(t, move(A), move(B)).values
    assert flow_feasibility_oracle(t, f, k) == flow_feasibility_oracle(t, g, k)
