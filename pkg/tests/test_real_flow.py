import random

import pytest
from hypothesis import given, settings, strategies as st

from equideco.conditions import SiteFunction, check_k_hall
from equideco.lattice import AmbientError, make_ambient
from equideco.oracle import hall_feasible_oracle, max_bipartite_matching
from equideco.real_flow import (InvariantError, build_real_flow, choose_real_tiles,
                                hopcroft_karp, lex_path, lift_function, path_flow)
from equideco.tiling import cube_core

from gen import hall_safe_function


def test_lift_examples():
    t = make_ambient("torus", (6,))
    lifted = lift_function(SiteFunction(t, {(0,): 2, (3,): -1, (4,): -1}))
    assert lifted.l == 2
    assert lifted.A == [((0,), 0), ((0,), 1)]
    assert lifted.B == [((3,), 0), ((4,), 0)]
    assert lift_function(SiteFunction(t, {})).l == 1


def test_lex_path_examples():
    t = make_ambient("torus", (6, 6))
    assert lex_path(t, (0, 0), (2, 1)) == [(((0, 0), 0), 1), (((1, 0), 0), 1), (((2, 0), 1), 1)]
    assert lex_path(t, (0, 0), (5, 0)) == [(((5, 0), 0), -1)]
    # ties on an even torus go the + way
    assert len(lex_path(t, (0, 0), (3, 0))) == 3 and lex_path(t, (0, 0), (3, 0))[0][1] == 1
    assert lex_path(t, (0, 0), (1, 1), axis_order=(1, 0))[0] == (((0, 0), 1), 1)


def test_path_flow_examples():
    t = make_ambient("torus", (6, 6))
    phi = path_flow(t, {(0, 0): (1, 0)})
    assert dict(phi.items()) == {((0, 0), 0): 1}
    phi = path_flow(t, {(0, 0): (1, 1)}, axis_orders=[(0, 1), (1, 0)])
    assert phi.denom == 2 and phi.sup_norm() == 0.5
    assert phi.divergence() == {(0, 0): 1, (1, 1): -1}


def test_real_flow_trivial_cases():
    t = make_ambient("torus", (8, 8))
    phi, rep = build_real_flow(SiteFunction(t, {}), 2)
    assert phi.num == {} and rep.matched == 0 and rep.whole_ambient
    phi, rep = build_real_flow(SiteFunction(t, {(0, 0): 1, (0, 1): -1}), 1)
    assert dict(phi.items()) == {((0, 0), 1): 1}
    assert rep.mismatch_sites == [] and rep.residual_fraction == 0
    with pytest.raises(AmbientError):
        build_real_flow(SiteFunction(make_ambient("torus", (4,), (2,)), {}), 1)
    with pytest.raises(ValueError):
        build_real_flow(SiteFunction(t, {}), 0)


def test_real_flow_raises_when_hall_fails():
    t = make_ambient("torus", (8, 8))
    f = SiteFunction(t, {(0, 0): 1, (4, 4): -1})
    with pytest.raises(InvariantError):
        build_real_flow(f, 2)


def test_whole_ambient_matching_agrees_with_oracle():
    rng = random.Random(17)
    t = make_ambient("torus", (16, 16))
    pts = list(t.points())
    agree = {True: 0, False: 0}
    for _ in range(40):
        m = rng.randint(3, 25)
        sample = rng.sample(pts, 2 * m)
        A, B = sample[:m], sample[m:]
        k = rng.randint(1, 6)
        want = hall_feasible_oracle(t, A, B, k)
        try:
            phi, rep = build_real_flow(SiteFunction.from_sets(t, A, B), k)
            got = True
            assert rep.mismatch_sites == [] and rep.matched == m
        except InvariantError:
            got = False
        assert got == want == check_k_hall(SiteFunction.from_sets(t, A, B), k).satisfied
        agree[got] += 1
    assert agree[True] and agree[False]


def test_path_flow_dimension_bound():
    rng = random.Random(3)
    t = make_ambient("torus", (12, 12))
    worst = 0
    for _ in range(200):
        f = hall_safe_function(t, rng, 3, 1, 0.5)
        phi, rep = build_real_flow(f, 3)
        assert rep.mismatch_sites == []
        assert phi.sup_norm() <= rep.dimension_bound == 8
        assert rep.dimension_bound <= rep.generator_bound
        worst = max(worst, phi.sup_norm())
    assert worst >= 2


def test_choose_real_tiles_examples():
    t = make_ambient("torus", (24, 24))
    n, cubes, worst = choose_real_tiles(t, 1, None)
    assert n is None and len(cubes) == 1
    n, cubes, worst = choose_real_tiles(t, 1, 0.5)
    # a side-m tile has delta* = 4/m; 24 splits into sides n, n+1 first at n = 11 (12 + 12)
    assert n == 11 and worst == pytest.approx(1 / 3)
    assert max(cube_core(t, c, 1).delta_star for c in cubes) == pytest.approx(worst)
    with pytest.raises(ValueError):
        choose_real_tiles(t, 1, 0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 3), st.integers(1, 2),
       st.sampled_from([None, 1.0, 0.5, 0.25]))
def test_real_flow_properties(seed, k, l, delta):
    rng = random.Random(seed)
    t = make_ambient(rng.choice(["torus", "window"]), (16, 16))
    f = hall_safe_function(t, rng, k, l, 0.3)
    phi, rep = build_real_flow(f, k, delta)
    assert phi.sup_norm() <= rep.dimension_bound <= rep.generator_bound
    assert 0 <= rep.residual_fraction <= 1
    if delta is None:
        assert rep.mismatch_sites == [] and rep.residual_fraction == 0
    else:
        assert rep.max_delta_star < delta
        assert rep.residual_fraction <= rep.residual_bound


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 7), st.integers(1, 7), st.data())
def test_hopcroft_karp_is_maximum(nl, nr, data):
    edges = data.draw(st.sets(st.tuples(st.integers(0, nl - 1), st.integers(0, nr - 1))))
    adj = {u: sorted(v for uu, v in edges if uu == u) for u in range(nl)}
    m = hopcroft_karp(list(range(nl)), adj)
    assert len(set(m.values())) == len(m)
    assert all(v in adj[u] for u, v in m.items())
    assert len(m) == len(max_bipartite_matching(list(range(nl)), adj))
