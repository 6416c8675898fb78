"""Random instance generators shared by the tests."""
from __future__ import annotations

import random

from equideco.conditions import SiteFunction
from equideco.flows import FlowMap
from equideco.lattice import AmbientError, make_ambient


def random_flow(amb, rng: random.Random, Q: int = 12, p_theta: float = 0.5,
                int_range: int = 1, wrap: bool = True) -> FlowMap:
    """Rational flow with integer divergence: integers plus fractional theta
    cycles, plus (on a torus) one fractional cycle around an axis."""
    flow = FlowMap(amb, Q)
    for e in amb.all_edges():
        flow.add_num(e, Q * rng.randint(-int_range, int_range))
    half = Q // 2 - 1
    for x in amb.points():
        for a in range(amb.d):
            for b in range(a + 1, amb.d):
                if rng.random() >= p_theta:
                    continue
                xa, xb = amb.shift(x, a, 1), amb.shift(x, b, 1)
                if xa is None or xb is None or amb.shift(xa, b, 1) is None:
                    continue
                s = rng.randint(-half, half)
                flow.add_num((x, a), s)
                flow.add_num((xa, b), s)
                flow.add_num((xb, a), -s)
                flow.add_num((x, b), -s)
    if wrap and amb.kind == "torus" and amb.d >= 1:
        axis = rng.randrange(amb.d)
        p = tuple(rng.randrange(N) for N in amb.sides)
        s = rng.randint(-half, half)
        for _ in range(amb.sides[axis]):
            flow.add_num((p, axis), s)
            p = amb.shift(p, axis, 1)
    return flow


def hall_safe_function(amb, rng: random.Random, k: int, l: int = 1,
                       density: float = 0.3) -> SiteFunction:
    """f = sum of (chi_p - chi_q) over random pairs at distance <= k.

    A site is never both a source and a sink, so the pairs themselves
    witness the k-Hall condition.
    """
    offsets = [o for o in amb.ball_offsets(k)]
    vals: dict = {}
    pts = list(amb.points())
    for p in rng.sample(pts, int(density * len(pts))):
        t, dl = rng.choice(offsets)
        q = amb.translate(p, t, dl)
        if q is None or q == p:
            continue
        if vals.get(p, 0) < 0 or vals.get(q, 0) > 0:
            continue
        if vals.get(p, 0) + 1 > l or vals.get(q, 0) - 1 < -l:
            continue
        vals[p] = vals.get(p, 0) + 1
        vals[q] = vals.get(q, 0) - 1
    return SiteFunction(amb, vals)


def shifted_partner(amb, A, rng: random.Random, k: int) -> list:
    """A set B of the same size, each point of A moved by at most k (best effort)."""
    offsets = amb.ball_offsets(k)
    taken: set = set()
    B = []
    for a in A:
        for _ in range(20):
            t, dl = rng.choice(offsets)
            b = amb.translate(a, t, dl)
            if b is not None and b not in taken:
                break
        else:
            b = next((q for q in amb.points() if q not in taken), a)
        taken.add(b)
        B.append(b)
    return sorted(B)


def small_ambients(max_points: int, min_points: int = 1) -> list:
    """Every torus / window with d <= 2 (plus a cyclic factor) and a bounded point count."""
    out = []

    def add(kind, sides, orders):
        try:
            amb = make_ambient(kind, sides, orders)
        except AmbientError:
            return
        if min_points <= len(amb) <= max_points and amb not in out:
            out.append(amb)

    for kind in ("torus", "window"):
        for orders in ((), (2,), (3,)):
            for a in range(1, max_points + 1):
                add(kind, (a,), orders)
                for b in range(a, max_points + 1):
                    if a * b <= max_points:
                        add(kind, (a, b), orders)
    for m in range(1, max_points + 1):
        add("torus", (), (m,))
    return out
