"""Rounding real-valued flows to integer flows on grid ambients.

The vertical axis is the last grid axis.  All work is exact: a FlowMap
keeps one common denominator Q and a theta amount is always a fractional
part of a current value, so Q never grows.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Iterable

import numpy as np

from .flows import FlowMap
from .lattice import AmbientError, AmbientGrid, CubeSpec, TORUS, edges as lattice_edges, nbhd
from .real_flow import InvariantError


@dataclass
class RoundingTrace:
    stages: list = field(default_factory=list)
    mod_count: dict = field(default_factory=dict)  # edge -> number of stages that changed it
    max_change: Fraction = Fraction(0)
    extra: dict = field(default_factory=dict)

    def record(self, name: str, before: FlowMap, after: FlowMap, edges: Iterable | None = None) -> None:
        self.stages.append(name)
        if edges is None:
            edges = set(before.num) | set(after.num)
        q = after.denom
        scale = q // before.denom if q % before.denom == 0 else None
        for e in edges:
            b = before.get_num(e) * scale if scale else Fraction(before.get_num(e), before.denom) * q
            if b != after.get_num(e):
                self.mod_count[e] = self.mod_count.get(e, 0) + 1

    def finish(self, start: FlowMap, end: FlowMap) -> None:
        diff = end - start
        self.max_change = diff.sup_norm()

    def max_mods(self) -> int:
        return max(self.mod_count.values(), default=0)

    def to_dict(self) -> dict:
        return {
            "stages": self.stages,
            "max_modifications_per_edge": self.max_mods(),
            "modified_edges": len(self.mod_count),
            "max_change": str(self.max_change),
            **self.extra,
        }


# -- local frames ----------------------------------------------------------------

class _Frame:
    """Relative coordinates anchored at ``origin``; no wrap inside ``size``."""

    def __init__(self, ambient: AmbientGrid, origin: tuple, size: tuple):
        if ambient.r:
            raise AmbientError("rounding works on grid ambients without a finite factor")
        self.amb = ambient
        self.origin = origin
        self.size = size
        torus = ambient.kind == TORUS
        for o, s, N in zip(origin, size, ambient.sides):
            if torus:
                if s > N:
                    raise AmbientError("region wraps onto itself")
            elif o < 0 or o + s > N:
                raise AmbientError("region leaves the window")
        self.torus = torus

    def pt(self, r) -> tuple:
        if self.torus:
            return tuple((o + x) % N for o, x, N in zip(self.origin, r, self.amb.sides))
        return tuple(o + x for o, x in zip(self.origin, r))

    def edge(self, r, axis: int) -> tuple:
        return (self.pt(r), axis)

    def rel(self, p) -> tuple:
        if self.torus:
            return tuple((x - o) % N for x, o, N in zip(p, self.origin, self.amb.sides))
        return tuple(x - o for x, o in zip(p, self.origin))


def _theta_rel(flow: FlowMap, fr: _Frame, x: tuple, a: int, b: int, s: int) -> None:
    """Push s (numerator) around x -> x+e_a -> x+e_a+e_b -> x+e_b -> x."""
    if not s:
        return
    xa = _plus(x, a)
    xb = _plus(x, b)
    flow.add_num(fr.edge(x, a), s)
    flow.add_num(fr.edge(xa, b), s)
    flow.add_num(fr.edge(xb, a), -s)
    flow.add_num(fr.edge(x, b), -s)


def _plus(x: tuple, a: int, step: int = 1) -> tuple:
    return x[:a] + (x[a] + step,) + x[a + 1:]


def _edge_between(ambient: AmbientGrid, p: tuple, q: tuple):
    """(positive edge, sign) with p -> q equal to sign times the edge."""
    for a in range(ambient.d):
        if ambient.shift(p, a, 1) == q:
            return (p, a), 1
        if ambient.shift(q, a, 1) == p:
            return (q, a), -1
    raise AmbientError(f"{p} and {q} are not adjacent")


def theta_flow(ambient: AmbientGrid, x1, x2, x3, x4, s) -> FlowMap:
    """The 0-flow carrying s around the unit square x1 -> x2 -> x3 -> x4 -> x1."""
    pts = [tuple(x1), tuple(x2), tuple(x3), tuple(x4)]
    if len(set(pts)) != 4:
        raise AmbientError("theta needs four distinct corners")
    axes = []
    for p, q in zip(pts, pts[1:] + pts[:1]):
        e, _ = _edge_between(ambient, p, q)
        axes.append(e[1])
    if axes[0] != axes[2] or axes[1] != axes[3] or axes[0] == axes[1]:
        raise AmbientError("corners do not form a unit square")
    flow = FlowMap(ambient, 1)
    for p, q in zip(pts, pts[1:] + pts[:1]):
        e, sign = _edge_between(ambient, p, q)
        flow.add(e, sign * Fraction(s))
    return flow


def _frac(flow: FlowMap, e) -> int:
    return flow.get_num(e) % flow.denom


# -- slabs -----------------------------------------------------------------------

def _check_slab(ambient: AmbientGrid, slab: CubeSpec) -> None:
    if slab.d != ambient.d or ambient.d < 2:
        raise AmbientError("slab rounding needs d >= 2 and a matching cube")
    if slab.extents[-1] != 1:
        raise AmbientError("a slab has exactly two layers along the last axis")


def _slab_axis(flow: FlowMap, fr: _Frame, lo: tuple, ext: tuple, axis: int) -> None:
    """In place: bottom-layer vertical edges with x_axis < lo+ext made integer."""
    V = len(lo) - 1
    ranges = [range(l, l + e + 1) for l, e in zip(lo[:V], ext[:V])]
    for j in range(ext[axis]):
        ranges_j = list(ranges)
        ranges_j[axis] = [lo[axis] + j]
        for h in product(*ranges_j):
            x = tuple(h) + (lo[V],)
            s = _frac(flow, fr.edge(x, V))
            _theta_rel(flow, fr, x, axis, V, s)


def _slab_frame(ambient: AmbientGrid, slab: CubeSpec) -> _Frame:
    return _Frame(ambient, slab.corner, tuple(e + 1 for e in slab.extents))


def round_slab_axis(phi: FlowMap, slab: CubeSpec, axis: int) -> FlowMap:
    """Two-layer slab, 0 <= axis < d-1: vertical edges over the bottom layer
    with x_axis below the last slab column become integer; |change| < 2."""
    amb = phi.ambient
    _check_slab(amb, slab)
    if not 0 <= axis < amb.d - 1:
        raise AmbientError("axis must be a horizontal axis")
    fr = _slab_frame(amb, slab)
    out = phi.copy()
    _slab_axis(out, fr, (0,) * amb.d, slab.extents, axis)
    return out


def _slab_all(flow: FlowMap, fr: _Frame, lo: tuple, ext: tuple) -> tuple:
    """In place; returns the relative corner whose vertical edge may stay fractional."""
    d = len(lo)
    for a in range(d - 1):
        sub_lo = tuple(lo[i] + ext[i] if i < a else lo[i] for i in range(d))
        sub_ext = tuple(0 if i < a else ext[i] for i in range(d))
        _slab_axis(flow, fr, sub_lo, sub_ext, a)
    return tuple(lo[i] + ext[i] for i in range(d - 1)) + (lo[d - 1],)


def round_slab(phi: FlowMap, slab: CubeSpec) -> FlowMap:
    """All bottom vertical edges of the slab integer except the far corner; |change| < 2d.

    In d = 1 there is nothing to do and phi is returned unchanged.
    """
    amb = phi.ambient
    if amb.d == 1:
        return phi.copy()
    _check_slab(amb, slab)
    fr = _slab_frame(amb, slab)
    out = phi.copy()
    _slab_all(out, fr, (0,) * amb.d, slab.extents)
    return out


def slab_corner(slab: CubeSpec, ambient: AmbientGrid | None = None) -> tuple:
    """Base of the vertical edge round_slab may leave fractional (reduced on a torus)."""
    p = tuple(c + e for c, e in zip(slab.corner[:-1], slab.extents[:-1])) + (slab.corner[-1],)
    if ambient is not None and ambient.kind == TORUS:
        p = tuple(x % N for x, N in zip(p, ambient.sides))
    return p


# -- cubes -------------------------------------------------------------------------

def _owner_array(fr: _Frame, inner: list) -> np.ndarray:
    owner = -np.ones(fr.size, dtype=np.int64)
    for i, box in enumerate(inner):
        sl = tuple(slice(a - 1, b + 2) for a, b in box)
        if (owner[sl] >= 0).any():
            raise AmbientError("inner cube neighbourhoods overlap")
        owner[sl] = i
    return owner


def round_cube(phi: FlowMap, f: dict, cube: CubeSpec, inner: list = (),
               trace: RoundingTrace | None = None, order_seed: int | None = None) -> FlowMap:
    """Make phi integer on edges+(C) minus the edges of every nbhd(C'), C' inner.

    Changes stay inside edges(nbhd(C)), never touch edges+(C'), and are below
    6d per edge.  f must be integer-valued; phi must be an f-flow near C.
    order_seed shuffles the within-layer edge order (results do not depend on it).
    """
    amb = phi.ambient
    d = amb.d
    if d < 2:
        raise AmbientError("cube rounding needs d >= 2")
    if cube.d != d:
        raise AmbientError("cube dimension does not match ambient")
    ks = tuple(e + 1 for e in cube.extents)  # points per side
    origin = tuple((c - 1) % N if amb.kind == TORUS else c - 1
                   for c, N in zip(cube.corner, amb.sides))
    size = tuple(k + 2 for k in ks)
    if amb.kind == TORUS and any(s >= N for s, N in zip(size, amb.sides)):
        raise AmbientError("nbhd of the cube wraps around the torus")
    fr = _Frame(amb, origin, size)
    boxes = []
    for c in inner:
        rel = fr.rel(c.corner)
        box = [(r, r + e) for r, e in zip(rel, c.extents)]
        for (a, b), k in zip(box, ks):
            if a - 1 < 1 or b + 1 > k:
                raise AmbientError(f"nbhd of inner cube {c} is not inside the cube")
        boxes.append(box)
    owner = _owner_array(fr, boxes)
    V = d - 1
    kd = ks[V]
    rng = random.Random(order_seed) if order_seed is not None else None
    out = phi.copy()
    before = phi

    def in_c(r):
        return all(1 <= x <= k for x, k in zip(r, ks))

    def in_E(r, a):
        q = _plus(r, a)
        if not (in_c(r) or in_c(q)):
            return False
        o1, o2 = owner[r], owner[q]
        return not (o1 >= 0 and o1 == o2)

    # stage 0: bottom vertical edges of C
    _slab_axis(out, fr, (1,) * (d - 1) + (0,), (ks[0],) + tuple(k - 1 for k in ks[1:V]) + (1,), 0)
    if trace is not None:
        trace.record("bottom slab", before, out)
        before = out.copy()
    for r0 in product(*(range(1, k + 1) for k in ks[:V])):
        e = fr.edge(tuple(r0) + (0,), V)
        if _frac(out, e):
            raise InvariantError("bottom vertical edge left fractional")
    horiz_ranges = [range(0, k + 1) for k in ks[:V]]
    for h in range(1, kd + 1):
        # odd stage: horizontal edges in layer h
        targets = []
        for a in range(V):
            for base in product(*horiz_ranges):
                r = tuple(base) + (h,)
                if r[a] > ks[a] or any(r[i] < 1 for i in range(V) if i != a) \
                        or any(r[i] > ks[i] for i in range(V) if i != a):
                    continue
                if in_E(r, a):
                    targets.append((r, a))
        if rng is not None:
            rng.shuffle(targets)
        amounts = [(r, a, -_frac(out, fr.edge(r, a))) for r, a in targets]
        for r, a, s in amounts:
            _theta_rel(out, fr, r, a, V, s)
        if trace is not None:
            trace.record(f"layer {h} horizontal", before, out)
            before = out.copy()
        # even stage: vertical edges from layer h
        faces = {}
        for base in product(*(range(1, k + 1) for k in ks[:V])):
            r = tuple(base) + (h,)
            if not in_E(r, V):
                continue
            o = owner[r]
            if o >= 0:
                faces.setdefault(int(o), []).append(r)
            elif _frac(out, fr.edge(r, V)):
                raise InvariantError(f"vertical edge at {fr.pt(r)} not forced integer")
        for j in sorted(faces):
            box = boxes[j]
            lo = tuple(a - 1 for a, _ in box[:V]) + (h,)
            ext = tuple(b - a + 2 for a, b in box[:V]) + (1,)
            corner = _slab_all(out, fr, lo, ext)
            if _frac(out, fr.edge(corner, V)):
                raise InvariantError("corner edge above an inner cube is fractional")
            for r in faces[j]:
                if _frac(out, fr.edge(r, V)):
                    raise InvariantError("upper-face vertical edge left fractional")
        if trace is not None and faces:
            trace.record(f"layer {h} faces", before, out)
            before = out.copy()
    return out


def cube_target_edges(ambient: AmbientGrid, cube: CubeSpec, inner: Iterable[CubeSpec] = ()) -> set:
    """E = edges+(C) minus edges(nbhd(C')) over the inner cubes."""
    from .lattice import cube_points, edges_plus
    E = edges_plus(ambient, cube_points(ambient, cube))
    for c in inner:
        E -= lattice_edges(ambient, nbhd(ambient, cube_points(ambient, c)))
    return E


# -- cycle canceling --------------------------------------------------------------

def boundary_correction(phi: FlowMap, S: Iterable | None = None, M=None) -> FlowMap:
    """Round the fractional edges inside S (all edges if S is None) to integers.

    Every vertex must see an integer sum of fractional parts.  Fractional
    cycles are pushed until one edge turns integer; each edge ends at the
    floor or ceiling of its value.  The push direction is the one giving
    the smaller largest |value| on the cycle, preferring values within M.
    """
    amb = phi.ambient
    out = phi.copy()
    q = out.denom
    if S is None:
        cand = out.fractional_edges()
    else:
        cand = out.fractional_edges(lattice_edges(amb, S))
    if not cand:
        return out
    adj: dict = {}
    head = {}
    for e in cand:
        u = e[0]
        v = amb.shift(u, e[1], 1)
        head[e] = v
        adj.setdefault(u, set()).add(e)
        adj.setdefault(v, set()).add(e)
    val = {e: out.get_num(e) for e in cand}
    for p, es in adj.items():
        tot = 0
        for e in es:
            tot += val[e] % q if e[0] == p else -(val[e] % q)
        if tot % q:
            raise ValueError(f"fractional divergence at {p}; cannot round")
    limit = None if M is None else Fraction(M)
    # the walk prefix survives a cancellation: its edges are untouched
    order: list = []
    pos: dict = {}
    used: list = []
    while adj:
        if not order:
            start = min(adj)
            order, pos, used = [start], {start: 0}, []
        cur = order[-1]
        prev_edge = used[-1][0] if used else None
        while True:
            choices = sorted(adj[cur] - ({prev_edge} if prev_edge is not None else set()))
            if not choices:
                choices = sorted(adj[cur])
            # close the shortest available cycle, else extend the path
            e = choices[0]
            best = -1
            for c in choices:
                w = head[c] if c[0] == cur else c[0]
                if pos.get(w, -1) > best:
                    e, best = c, pos[w]
            nxt = head[e] if e[0] == cur else e[0]
            used.append((e, 1 if e[0] == cur else -1))
            prev_edge = e
            if nxt in pos:
                cut = pos[nxt]
                cyc = used[cut:]
                break
            pos[nxt] = len(order)
            order.append(nxt)
            cur = nxt
        up = min((q - val[e] % q) if sg > 0 else val[e] % q for e, sg in cyc)
        down = min(val[e] % q if sg > 0 else (q - val[e] % q) for e, sg in cyc)

        def peak(amount):
            return max(abs(val[e] + sg * amount) for e, sg in cyc)

        options = [(up, peak(up)), (-down, peak(-down))]
        if limit is not None:
            ok = [o for o in options if Fraction(o[1], q) <= limit]
            options = ok or options
        amount = min(options, key=lambda o: (o[1], -o[0]))[0]
        for e, sg in cyc:
            val[e] += sg * amount
            if not val[e] % q:
                u, v = e[0], head[e]
                adj[u].discard(e)
                adj[v].discard(e)
                if not adj[u]:
                    del adj[u]
                if v in adj and not adj[v]:
                    del adj[v]
        for p in order[cut + 1:]:
            del pos[p]
        del order[cut + 1:]
        del used[cut:]
        if order[-1] not in adj:
            order, pos, used = [], {}, []
    for e, n in val.items():
        out.set_num(e, n)
    return out


# -- full conversion ---------------------------------------------------------------

def _contains(ambient: AmbientGrid, outer: CubeSpec, inner: CubeSpec, pad: int) -> bool:
    """inner grown by pad lies inside outer (per-axis arcs)."""
    for co, eo, ci, ei, N in zip(outer.corner, outer.extents, inner.corner, inner.extents,
                                 ambient.sides):
        if ambient.kind == TORUS:
            off = (ci - pad - co) % N
            if off + ei + 2 * pad > eo:
                return False
        elif ci - pad < co or ci + ei + pad > co + eo:
            return False
    return True


def make_integer_flow(phi: FlowMap, f: dict, family=None,
                      trace: RoundingTrace | None = None) -> FlowMap:
    """Integer f-flow within |phi| + 12d of phi.

    d = 1 takes floors.  For d >= 2 the cubes of the family are rounded
    stage by stage (smaller sides first), each with the maximal earlier
    cubes it contains as exclusions; the rings nbhd(C') minus C' are then
    corrected one by one, and a last pass rounds whatever is left.
    """
    amb = phi.ambient
    if any(int(v) != v for v in f.values()):
        raise ValueError("f must be integer-valued")
    trace = trace if trace is not None else RoundingTrace()
    if phi.all_integer():
        trace.stages.append("already integer")
        return phi.normalized()
    if amb.d == 1:
        out = phi.floor()
        trace.record("floor", phi, out)
        trace.finish(phi, out)
        return out
    out = phi.copy()
    done: list = []
    cube_mods: dict = {}
    skipped = 0
    stages = family.stages if family is not None else []
    for si, cubes in enumerate(stages):
        for ci, C in enumerate(cubes):
            inner = [c for c in done if _contains(amb, C, c, 1)]
            maximal = [c for c in inner
                       if not any(o is not c and o != c and _contains(amb, o, c, 0) for o in inner)]
            before = out
            try:
                out = round_cube(out, f, C, maximal)
            except AmbientError:
                skipped += 1
                continue
            ch = _changed(before, out)
            trace.record(f"cube {si}:{ci}", before, out, ch)
            for e in ch:
                cube_mods[e] = cube_mods.get(e, 0) + 1
        done.extend(cubes)
    from .lattice import cube_points
    for C in done:
        ring = nbhd(amb, cube_points(amb, C)) - cube_points(amb, C)
        before = out
        try:
            out = boundary_correction(out, ring)
        except ValueError:
            # ring still touches fractional edges outside it; the last pass takes it
            continue
        ch = _changed(before, out)
        if ch:
            trace.record("ring", before, out, ch)
    before = out
    out = boundary_correction(out, None)
    ch = _changed(before, out)
    if ch:
        trace.record("final correction", before, out, ch)
    trace.extra["skipped_cubes"] = skipped
    trace.extra["max_cube_modifications_per_edge"] = max(cube_mods.values(), default=0)
    trace.finish(phi, out)
    if not out.all_integer():
        raise InvariantError("rounding left fractional edges")
    return out.normalized()


def _changed(a: FlowMap, b: FlowMap) -> set:
    diff = b - a
    return set(diff.num)
