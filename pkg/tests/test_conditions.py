import random

import pytest
from hypothesis import given, settings, strategies as st

from equideco.conditions import (SiteFunction, check_k_hall, check_k_hall_sets, discrepancy,
                                 equidistribution_report)
from equideco.lattice import CubeSpec, cube_points, make_ambient
from equideco.oracle import hall_bruteforce, hall_feasible_oracle

from gen import small_ambients


def brute_worst(amb, A, n):
    """Worst discrepancy over every cube with n+1 points per axis, by enumeration."""
    A = set(A)
    vals = []
    for base in amb.grid_points():
        cube = CubeSpec(base, (n,) * amb.d)
        if amb.kind == "window" and any(b + n >= s for b, s in zip(base, amb.sides)):
            continue
        vals.append(discrepancy(amb, cube_points(amb, cube), A))
    return max(vals)


def test_discrepancy_examples():
    t = make_ambient("torus", (8, 8))
    every = list(t.points())
    F = [(x, y) for x in range(4) for y in range(8)]
    assert discrepancy(t, F, every) == 0
    assert discrepancy(t, F, []) == 0
    left = [(x, y) for x in range(4) for y in range(8)]
    assert discrepancy(t, F, left) == 0.5
    with pytest.raises(ValueError):
        discrepancy(t, [], left)


def test_report_full_set_is_flat():
    t = make_ambient("torus", (8, 8))
    rep = equidistribution_report(t, t.points(), 5)
    assert rep.worst == [0.0] * 5 and rep.fitted_c == 0


def test_report_checkerboard():
    t = make_ambient("torus", (8, 8))
    board = [p for p in t.points() if sum(p) % 2 == 0]
    rep = equidistribution_report(t, board, 3)
    # frozen from the enumeration below: odd boxes are balanced, 3x3 boxes are off by 1/18
    assert rep.worst == pytest.approx([0.0, 1 / 18, 0.0])
    assert rep.worst == pytest.approx([brute_worst(t, board, n) for n in (1, 2, 3)])
    assert rep.fitted_c == pytest.approx(2 / 18)


def test_report_left_half():
    t = make_ambient("torus", (16, 16))
    left = [(x, y) for x in range(8) for y in range(16)]
    rep = equidistribution_report(t, left, 7)
    assert rep.worst == [0.5] * 7
    assert rep.worst[0] == brute_worst(t, left, 1)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([make_ambient("torus", (6, 5)), make_ambient("window", (7, 6)),
                        make_ambient("torus", (5,), (2,)), make_ambient("window", (9,), (3,))]),
       st.data())
def test_report_matches_enumeration(amb, data):
    A = data.draw(st.lists(st.sampled_from(sorted(amb.points())), unique=True))
    n_max = min(amb.sides) - 1
    if n_max < 1:
        return
    rep = equidistribution_report(amb, A, n_max)
    for n, w in zip(rep.n_values, rep.worst):
        assert 0 <= w <= 1
        assert w == pytest.approx(brute_worst(amb, A, n))


def test_hall_examples():
    t = make_ambient("torus", (12, 12))
    assert check_k_hall(SiteFunction(t, {}), 3).satisfied
    assert check_k_hall(SiteFunction(t, {(0, 0): 1, (0, 1): -1}), 1).satisfied
    v = check_k_hall(SiteFunction(t, {(0, 0): 1, (5, 5): -1}), 1)
    assert not v.satisfied
    assert v.witness == [(0, 0)] and v.side == "positive" and (v.lhs, v.rhs) == (1, 0)
    A = [(1, 1), (2, 5), (7, 7)]
    assert check_k_hall_sets(t, A, A, 1).satisfied
    with pytest.raises(ValueError):
        check_k_hall(SiteFunction(t, {}), 0)


def test_sets_version_on_disjoint_sets_matches_function():
    t = make_ambient("torus", (12, 12))
    rng = random.Random(5)
    for _ in range(50):
        pts = rng.sample(list(t.points()), 20)
        A, B = pts[:10], pts[10:]
        k = rng.randint(1, 3)
        assert (check_k_hall_sets(t, A, B, k).satisfied
                == check_k_hall(SiteFunction.from_sets(t, A, B), k).satisfied)


def test_sets_version_allows_self_pairing():
    # chi_A - chi_B cancels the shared point, so the function version sees a
    # +1 at (0,0) whose partner sits three steps away
    t = make_ambient("torus", (12, 12))
    A = [(0, 0), (1, 0)]
    B = [(1, 0), (3, 0)]
    assert not check_k_hall(SiteFunction.from_sets(t, A, B), 2).satisfied
    assert check_k_hall_sets(t, A, B, 2).satisfied
    assert hall_feasible_oracle(t, A, B, 2)


def _recheck(f, v):
    sign = 1 if v.side == "positive" else -1
    F = set(v.witness)
    assert F and all(sign * f[p] > 0 for p in F)
    lhs = sum(sign * f[p] for p in F)
    reach = set()
    for p in F:
        reach.update(f.ambient.ball_points(p, v.k))
    rhs = sum(-sign * f[q] for q in reach if sign * f[q] < 0)
    return lhs, rhs


functions = st.sampled_from(small_ambients(10, 2)).flatmap(
    lambda amb: st.builds(
        lambda vals: SiteFunction(amb, dict(zip(sorted(amb.points()), vals))),
        st.lists(st.integers(-2, 2), min_size=len(amb), max_size=len(amb))))


@settings(max_examples=150, deadline=None)
@given(functions, st.integers(1, 3))
def test_hall_agrees_with_subset_enumeration(f, k):
    v = check_k_hall(f, k)
    assert v.satisfied == hall_bruteforce(f.ambient, f.values, k)
    if not v.satisfied:
        lhs, rhs = _recheck(f, v)
        assert lhs > rhs and (lhs, rhs) == (v.lhs, v.rhs)
    else:
        assert v.witness == []


@settings(max_examples=60, deadline=None)
@given(functions)
def test_hall_is_monotone_in_k(f):
    verdicts = [check_k_hall(f, k).satisfied for k in (1, 2, 3, 4)]
    assert verdicts == sorted(verdicts)


def test_site_function_basics():
    t = make_ambient("window", (4,))
    f = SiteFunction.from_sets(t, [(0,), (1,)], [(1,), (3,)])
    assert f.values == {(0,): 1, (3,): -1}
    assert f.bound == 1 and f.total() == 0
    assert f.positive() == [(0,)] and f.negative() == [(3,)]
    with pytest.raises(ValueError):
        SiteFunction(t, {(9,): 1})
