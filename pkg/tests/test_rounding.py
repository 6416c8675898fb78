import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from equideco.flows import FlowMap
from equideco.lattice import AmbientError, CubeSpec, cube_points, edges, edges_plus, make_ambient, nbhd
from equideco.rounding import (RoundingTrace, boundary_correction, cube_target_edges,
                               make_integer_flow, round_cube, round_slab, round_slab_axis,
                               slab_corner, theta_flow)
from equideco.tiling import nested_family

from gen import random_flow


def _div_int(flow):
    return {p: int(v) for p, v in flow.divergence().items()}


def _vertical_bottom(amb, slab):
    V = amb.d - 1
    return [(p, V) for p in cube_points(amb, slab) if p[V] == slab.corner[V] % amb.sides[V]]


def test_theta_examples():
    t = make_ambient("torus", (5, 5))
    sq = [(0, 0), (1, 0), (1, 1), (0, 1)]
    assert theta_flow(t, *sq, 0).num == {}
    th = theta_flow(t, *sq, Fraction(1, 3))
    assert th.divergence() == {}
    assert th[((0, 0), 0)] == Fraction(1, 3) and th[((0, 0), 1)] == Fraction(-1, 3)
    with pytest.raises(AmbientError):
        theta_flow(t, (0, 0), (1, 0), (2, 0), (3, 0), 1)
    with pytest.raises(AmbientError):
        theta_flow(t, (0, 0), (1, 0), (1, 0), (0, 1), 1)


@pytest.mark.parametrize("ext", [(2, 1), (3, 1)])
def test_slab_examples(ext):
    rng = random.Random(sum(ext))
    t = make_ambient("torus", (9, 9))
    slab = CubeSpec((7, 4), ext)
    phi = random_flow(t, rng, Q=6, p_theta=1.0)
    one = round_slab_axis(phi, slab, 0)
    whole = round_slab(phi, slab)
    for out in (one, whole):
        assert out.divergence() == phi.divergence()
        assert (out - phi).sup_norm() < 2 * t.d
        assert (out - phi).support() <= edges(t, cube_points(t, slab))
    corner = slab_corner(slab, t)
    assert corner == ((7 + ext[0]) % 9, 4)
    assert [e for e in _vertical_bottom(t, slab) if not whole.is_integer(e)] in ([], [(corner, 1)])
    assert (one - phi).sup_norm() < 2


def test_slab_rejects_bad_shapes():
    t = make_ambient("torus", (6, 6))
    phi = FlowMap(t)
    with pytest.raises(AmbientError):
        round_slab(phi, CubeSpec((0, 0), (2, 2)))
    with pytest.raises(AmbientError):
        round_slab_axis(phi, CubeSpec((0, 0), (2, 1)), 1)
    # d = 1 has no slabs to fix
    line = make_ambient("torus", (6,))
    assert round_slab(FlowMap(line), CubeSpec((0,), (1,))).num == {}


def test_round_cube_with_inner_cube():
    rng = random.Random(12)
    t = make_ambient("torus", (16, 16))
    C = CubeSpec((2, 3), (7, 7))
    inner = [CubeSpec((5, 6), (1, 1))]
    phi = random_flow(t, rng, Q=12, p_theta=1.0)
    f = _div_int(phi)
    out = round_cube(phi, f, C, inner)
    target = cube_target_edges(t, C, inner)
    assert all(out.is_integer(e) for e in target)
    changed = (out - phi).support()
    assert changed <= edges(t, nbhd(t, cube_points(t, C)))
    assert not changed & edges_plus(t, cube_points(t, inner[0]))
    assert (out - phi).sup_norm() < 6 * t.d
    assert out.divergence() == phi.divergence()
    # the within-layer order does not matter
    assert round_cube(phi, f, C, inner, order_seed=5) == out


def test_round_cube_rejects_bad_inner():
    t = make_ambient("torus", (16, 16))
    phi = FlowMap(t)
    with pytest.raises(AmbientError):
        round_cube(phi, {}, CubeSpec((0, 0), (7, 7)), [CubeSpec((0, 0), (1, 1))])
    with pytest.raises(AmbientError):
        round_cube(phi, {}, CubeSpec((0, 0), (14, 14)))


def test_boundary_correction_single_square():
    t = make_ambient("torus", (4, 4))
    phi = theta_flow(t, (0, 0), (1, 0), (1, 1), (0, 1), Fraction(1, 2))
    out = boundary_correction(phi)
    assert out.all_integer() and out.divergence() == {}
    assert all(abs(out[e] - phi[e]) < 1 for e in t.all_edges())
    bad = FlowMap.from_values(t, {((0, 0), 0): "1/2"})
    with pytest.raises(ValueError):
        boundary_correction(bad)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from(["torus", "window"]), st.sampled_from([2, 6, 12]))
def test_boundary_correction_rounds_to_floor_or_ceiling(seed, kind, Q):
    rng = random.Random(seed)
    amb = make_ambient(kind, (6, 6))
    phi = random_flow(amb, rng, Q=Q, p_theta=0.6)
    out = boundary_correction(phi)
    assert out.all_integer()
    assert out.divergence() == phi.divergence()
    for e in amb.all_edges():
        assert out[e] in (math.floor(phi[e]), math.ceil(phi[e]))


def test_make_integer_flow_d1_takes_floors():
    t = make_ambient("torus", (8,))
    phi = FlowMap(t, 4)
    for e in t.all_edges():
        phi.add_num(e, 3)  # a 3/4 circulation around the cycle
    phi.add_num(((0,), 0), 8)
    out = make_integer_flow(phi, {(0,): 2, (1,): -2})
    assert out == phi.floor()
    assert out.divergence() == {(0,): 2, (1,): -2}


def test_make_integer_flow_is_idempotent_on_integers():
    rng = random.Random(1)
    t = make_ambient("torus", (6, 6))
    phi = random_flow(t, rng, Q=1, p_theta=0, wrap=False)
    trace = RoundingTrace()
    assert make_integer_flow(phi, _div_int(phi), trace=trace) == phi
    assert trace.stages == ["already integer"]
    with pytest.raises(ValueError):
        make_integer_flow(phi, {(0, 0): Fraction(1, 2)})


@pytest.mark.parametrize("seed", range(4))
def test_make_integer_flow_d2_with_family(seed):
    rng = random.Random(seed)
    t = make_ambient("torus", (12, 12))
    fam = nested_family(t, 2, 2, side_schedule={2: 4, 3: 6}.__getitem__, seed=seed)
    phi = random_flow(t, rng, Q=12, p_theta=0.5)
    f = _div_int(phi)
    trace = RoundingTrace()
    out = make_integer_flow(phi, f, fam, trace)
    assert out.all_integer()
    assert out.divergence_mismatch(f) == []
    assert (out - phi).sup_norm() <= 12 * t.d
    assert trace.max_change == (out - phi).sup_norm()
    assert trace.extra["max_cube_modifications_per_edge"] <= 2
    assert out.sup_norm() <= phi.sup_norm() + 12 * t.d


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from([(6, 6), (5, 7), (4, 4, 4)]))
def test_make_integer_flow_without_family(seed, sides):
    rng = random.Random(seed)
    amb = make_ambient(rng.choice(["torus", "window"]), sides)
    phi = random_flow(amb, rng, Q=rng.choice([2, 6, 10]), p_theta=0.5)
    f = _div_int(phi)
    out = make_integer_flow(phi, f)
    assert out.all_integer() and out.divergence_mismatch(f) == []
    assert (out - phi).sup_norm() <= 12 * amb.d
