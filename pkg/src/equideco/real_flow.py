"""Bounded f-flows from tile-core matchings and lexicographic shortest paths."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .conditions import SiteFunction
from .flows import FlowMap
from .lattice import AmbientError, AmbientGrid, CubeSpec, TORUS
from .tiling import (_axis_profile, axis_segments, cube_points, group_ball_size,
                     segment_lengths)


class InvariantError(RuntimeError):
    """An internal consistency check failed; the inputs looked valid."""


@dataclass
class LiftedSets:
    """Units of f: site x carries |f(x)| units on fibre levels 0, 1, ...

    Units are ``(point, level)``.  Distance between units is the distance
    of their base points, so moving between levels is free.
    """

    ambient: AmbientGrid
    l: int
    A: list
    B: list


def lift_function(f: SiteFunction) -> LiftedSets:
    l = max(1, f.bound)
    A, B = [], []
    for p in sorted(f.values):
        v = f.values[p]
        target = A if v > 0 else B
        target.extend((p, i) for i in range(abs(v)))
    return LiftedSets(f.ambient, l, A, B)


@dataclass
class PartialMatching:
    pairs: dict = field(default_factory=dict)  # A-unit -> B-unit
    k: int = 0

    def __len__(self) -> int:
        return len(self.pairs)


def hopcroft_karp(left: list, adjacency: dict) -> dict:
    """Maximum bipartite matching; left order and adjacency order fix the result."""
    INF = float("inf")
    match_l: dict = {}
    match_r: dict = {}
    while True:
        dist = {}
        queue = deque()
        for u in left:
            if u not in match_l:
                dist[u] = 0
                queue.append(u)
        found = INF
        while queue:
            u = queue.popleft()
            if dist[u] >= found:
                continue
            for v in adjacency.get(u, ()):
                w = match_r.get(v)
                if w is None:
                    found = min(found, dist[u] + 1)
                elif w not in dist:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        if found == INF:
            return match_l
        for u in left:
            if u in match_l:
                continue
            # iterative layered DFS
            stack = [(u, iter(adjacency.get(u, ())))]
            path = []
            while stack:
                x, it = stack[-1]
                advanced = False
                for v in it:
                    w = match_r.get(v)
                    if w is None:
                        if dist[x] + 1 == found:
                            path.append(v)
                            for (xx, _), vv in zip(stack, path):
                                match_l[xx] = vv
                                match_r[vv] = xx
                            stack = []
                            advanced = True
                            break
                    elif dist.get(w) == dist[x] + 1:
                        path.append(v)
                        stack.append((w, iter(adjacency.get(w, ()))))
                        advanced = True
                        break
                if stack and not advanced:
                    dist[x] = INF
                    stack.pop()
                    if path:
                        path.pop()


def tile_matching(ambient: AmbientGrid, tiles: list, cores: list, A: list, B: list,
                  k: int) -> PartialMatching:
    """Match every A-unit on a tile core to a B-unit of the same tile within distance k."""
    offsets = ambient.ball_offsets(k)
    a_by_site: dict = {}
    for u in A:
        a_by_site.setdefault(u[0], []).append(u)
    b_by_site: dict = {}
    for u in B:
        b_by_site.setdefault(u[0], []).append(u)
    pairs = {}
    for tile, core in zip(tiles, cores):
        left = sorted(u for p in core if p in a_by_site for u in a_by_site[p])
        adj = {}
        for u in left:
            near = {ambient.translate(u[0], t, dl) for t, dl in offsets}
            near.discard(None)
            adj[u] = sorted(v for q in near if q in tile and q in b_by_site
                            for v in b_by_site[q])
        m = hopcroft_karp(left, adj)
        if len(m) != len(left):
            raise InvariantError(
                f"tile matching left {len(left) - len(m)} core units unmatched; "
                "the k-Hall condition must fail")
        pairs.update(m)
    return PartialMatching(pairs, k)


def lex_path(ambient: AmbientGrid, x: tuple, y: tuple, axis_order=None) -> list:
    """Edges of the lexicographically least shortest path x -> y as (edge, sign).

    Generator order +e1 < -e1 < +e2 < ...: all moves along axis 0 first,
    then axis 1, and so on; torus ties go the + way.  axis_order permutes
    the axes.
    """
    t, _ = ambient.displacement(x, y)
    out = []
    cur = x
    for axis in (axis_order if axis_order is not None else range(len(t))):
        steps = t[axis]
        step = 1 if steps > 0 else -1
        for _ in range(abs(steps)):
            if step > 0:
                out.append(((cur, axis), 1))
                cur = ambient.shift(cur, axis, 1)
            else:
                nxt = ambient.shift(cur, axis, -1)
                out.append(((nxt, axis), -1))
                cur = nxt
    return out


def path_flow(ambient: AmbientGrid, pairs: dict, axis_orders=None) -> FlowMap:
    """Superpose one unit along the lexicographic path of each matched pair.

    With several axis orders each pair sends an equal share along each.
    """
    orders = list(axis_orders) if axis_orders else [None]
    flow = FlowMap(ambient, len(orders))
    for a, b in sorted(pairs.items()):
        x = a[0] if _is_unit(a) else a
        y = b[0] if _is_unit(b) else b
        for order in orders:
            for e, sign in lex_path(ambient, x, y, order):
                flow.add_num(e, sign)
    return flow.normalized()


def _is_unit(u) -> bool:
    return len(u) == 2 and isinstance(u[0], tuple)


@dataclass
class RealFlowReport:
    tile_side: int | None
    tile_count: int
    k: int
    l: int
    delta: float | None
    K_size: int
    max_delta_star: float
    matched: int
    residual_fraction: float
    residual_bound: float | None
    mismatch_sites: list
    sup_norm: str
    generator_bound: int
    dimension_bound: int
    whole_ambient: bool

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["mismatch_sites"] = [list(p) for p in self.mismatch_sites]
        return d


def _tile_profiles(ambient: AmbientGrid, n: int, k: int):
    """Per-axis segment lists and the δ* and core data of every tile, or None if n does not fit."""
    torus = ambient.kind == TORUS
    try:
        for N in ambient.sides:
            segment_lengths(N, n)
    except AmbientError:
        return None
    per_axis = []
    for a, N in enumerate(ambient.sides):
        segs = axis_segments(N, n, 0, torus)
        per_axis.append([(s, L, _axis_profile(ambient, a, s, L, k)) for s, L in segs])
    return per_axis


def _whole_tile(ambient: AmbientGrid) -> CubeSpec:
    return CubeSpec((0,) * ambient.d, tuple(N - 1 for N in ambient.sides))


def choose_real_tiles(ambient: AmbientGrid, k: int, delta: float | None):
    """Least side n whose product tiling has every tile (K, δ)-invariant.

    Returns (n, cubes, max δ*); n is None when the whole ambient is one tile.
    """
    import numpy as np
    from itertools import product

    if delta is None:
        return None, [_whole_tile(ambient)], 0.0
    if delta <= 0:
        raise ValueError("delta must be positive")
    for n in range(1, max(ambient.sides) + 1):
        per_axis = _tile_profiles(ambient, n, k)
        if per_axis is None:
            continue
        worst = 0.0
        cubes = []
        for combo in product(*per_axis):
            poly = np.array([1], dtype=object)
            size = 1
            for s, L, (counts, _) in combo:
                poly = np.convolve(poly, np.array(counts, dtype=object))
                size *= L
            grow = int(sum(poly[: k + 1])) - size
            worst = max(worst, grow / size)
            cubes.append(CubeSpec(tuple(s for s, _, _ in combo),
                                  tuple(L - 1 for _, L, _ in combo)))
        if worst < delta:
            return n, cubes, worst
    return None, [_whole_tile(ambient)], 0.0


def build_real_flow(f: SiteFunction, k: int, delta: float | None = None,
                    axis_orders=None):
    """Bounded f-flow from per-tile core matchings.

    With delta=None the whole ambient is a single tile and the flow is an
    exact f-flow.  With a delta, tiles are the smallest product cubes that
    are (K, delta)-invariant; the part of the lifted space left uncovered by
    the matching is reported.  axis_orders averages the paths over
    several axis orders (the default is the natural order only).
    """
    from .tiling import _cube_core_points

    amb = f.ambient
    if amb.r:
        raise AmbientError("real flows live on the grid; quotient out the finite factor first")
    if amb.d == 0:
        raise AmbientError("real flows need d >= 1")
    if k < 1:
        raise ValueError("k must be >= 1")
    lifted = lift_function(f)
    n, cubes, worst = choose_real_tiles(amb, k, delta)
    tiles = [cube_points(amb, c) for c in cubes]
    cores = [_cube_core_points(amb, c, k) for c in cubes]
    h = tile_matching(amb, tiles, cores, lifted.A, lifted.B, k)
    flow = path_flow(amb, h.pairs, axis_orders)
    # X'' = union of lifted cores minus the unmatched B-units there
    matched_b = set(h.pairs.values())
    all_core = set().union(*cores)
    core_units = len(all_core) * lifted.l
    unmatched_b_core = sum(1 for u in lifted.B if u not in matched_b and u[0] in all_core)
    x2 = core_units - unmatched_b_core
    residual = 1 - x2 / (lifted.l * len(amb))
    K = group_ball_size(amb, k)
    g = len(amb.generators())
    mismatch = flow.divergence_mismatch(f.values, set(amb.points()))
    rep = RealFlowReport(
        tile_side=n, tile_count=len(cubes), k=k, l=lifted.l, delta=delta, K_size=K,
        max_delta_star=worst, matched=len(h.pairs), residual_fraction=residual,
        residual_bound=None if delta is None else 3 * delta * K,
        mismatch_sites=mismatch, sup_norm=str(flow.sup_norm()),
        generator_bound=lifted.l * g ** k, dimension_bound=lifted.l * max(amb.d, 1) ** k,
        whole_ambient=n is None)
    return flow, rep

