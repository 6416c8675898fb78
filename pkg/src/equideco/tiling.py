"""Cube tilings with sides {n, n+1}, interior iteration, meets, nested
families and invariant cores.

Sides are point counts: a segment of length L covers L consecutive
coordinates, so a cube with extents k_i has k_i + 1 points per side.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from functools import reduce
from itertools import product
from typing import Callable, Iterable

import numpy as np

from .lattice import (AmbientError, AmbientGrid, CubeSpec, TORUS, ball,
                      cube_points)


@dataclass
class CubeTiling:
    ambient: AmbientGrid
    cubes: list
    n: int

    def to_dict(self) -> dict:
        return {"ambient": self.ambient.to_dict(), "n": self.n,
                "cubes": [c.to_dict() for c in self.cubes]}

    @classmethod
    def from_dict(cls, data: dict) -> "CubeTiling":
        amb = AmbientGrid.from_dict(data["ambient"])
        return cls(amb, [CubeSpec.from_dict(c) for c in data["cubes"]], int(data["n"]))

    def owner_map(self) -> dict:
        """grid point -> cube index."""
        owner = {}
        for i, c in enumerate(self.cubes):
            for p in _grid_cells(self.ambient, c):
                owner[p] = i
        return owner


def _grid_cells(ambient: AmbientGrid, cube: CubeSpec) -> Iterable:
    axes = []
    for c, k, n in zip(cube.corner, cube.extents, ambient.sides):
        if ambient.kind == TORUS:
            axes.append([(c + o) % n for o in range(k + 1)])
        else:
            axes.append(list(range(c, c + k + 1)))
    return product(*axes)


# -- segments ------------------------------------------------------------------

def segment_lengths(N: int, n: int) -> list:
    """Split N into parts n and n+1, as many n-parts as possible, n-parts first."""
    if n < 1:
        raise ValueError("segment length must be >= 1")
    for a in range(N // n, -1, -1):
        rest = N - a * n
        if rest % (n + 1) == 0:
            return [n] * a + [n + 1] * (rest // (n + 1))
    raise AmbientError(f"side {N} is not a sum of parts {n} and {n + 1}")


def axis_segments(N: int, n: int, offset: int = 0, torus: bool = True) -> list:
    """(start, length) segments tiling one axis; on a torus rotated by offset."""
    out = []
    pos = offset % N if torus else 0
    for L in segment_lengths(N, n):
        out.append((pos, L))
        pos = (pos + L) % N if torus else pos + L
    return out


def tile_cubes(ambient: AmbientGrid, n: int, offsets: Iterable[int] | None = None) -> CubeTiling:
    """Product tiling of the grid part by cubes with n or n+1 points per side."""
    offs = list(offsets) if offsets is not None else [0] * ambient.d
    torus = ambient.kind == TORUS
    per_axis = [axis_segments(N, n, o, torus) for N, o in zip(ambient.sides, offs)]
    cubes = [CubeSpec(tuple(s for s, _ in combo), tuple(L - 1 for _, L in combo))
             for combo in product(*per_axis)]
    return CubeTiling(ambient, cubes, n)


def tiling_is_partition(tiling: CubeTiling) -> bool:
    seen = set()
    total = 0
    for c in tiling.cubes:
        for p in _grid_cells(tiling.ambient, c):
            seen.add(p)
            total += 1
    return total == len(seen) == tiling.ambient.grid_size


# -- interior and meet -----------------------------------------------------------

def interior_iterate(ambient: AmbientGrid, cubes: Iterable[CubeSpec], k: int) -> list:
    if k < 0:
        raise ValueError("k must be >= 0")
    out = []
    for c in cubes:
        ext = tuple(e - 2 * k for e in c.extents)
        if any(e < 0 for e in ext):
            continue
        corner = tuple((x + k) % N if ambient.kind == TORUS else x + k
                       for x, N in zip(c.corner, ambient.sides))
        out.append(CubeSpec(corner, ext))
    return out


def _arc_meet(a: tuple, b: tuple, N: int, torus: bool) -> list:
    """Intersection of two axis intervals (start, length) as a list of intervals."""
    (s1, l1), (s2, l2) = a, b
    if not torus:
        lo, hi = max(s1, s2), min(s1 + l1, s2 + l2)
        return [(lo, hi - lo)] if hi > lo else []
    out = []
    for shift in (-N, 0, N):
        t = s2 + shift - s1
        lo, hi = max(0, t), min(l1, t + l2)
        if hi > lo:
            out.append(((s1 + lo) % N, hi - lo))
    # dedupe pieces that coincide after reduction
    return sorted(set(out))


def meet(ambient: AmbientGrid, S: Iterable[CubeSpec], T: Iterable[CubeSpec]) -> list:
    """All nonempty pairwise intersections C n C' for C in S, C' in T."""
    T = list(T)
    torus = ambient.kind == TORUS
    out = []
    for c in S:
        for e in T:
            per_axis = []
            for i, N in enumerate(ambient.sides):
                pieces = _arc_meet((c.corner[i], c.extents[i] + 1),
                                   (e.corner[i], e.extents[i] + 1), N, torus)
                if not pieces:
                    break
                per_axis.append(pieces)
            else:
                for combo in product(*per_axis):
                    out.append(CubeSpec(tuple(s for s, _ in combo),
                                        tuple(L - 1 for _, L in combo)))
    return out


# -- nested families -----------------------------------------------------------

def cubic_schedule(n: int) -> int:
    return n ** 3


@dataclass
class NestedFamily:
    ambient: AmbientGrid
    stage_params: list  # n for each stage
    stages: list  # list of lists of CubeSpec
    coverage: float
    bound: float  # 1 - d * sum_{k=n0}^{n_last} 3/k^2
    truncation_deficit: float  # d * sum_{k>n_last} 3/k^2
    schedule_bound: float  # same estimate recomputed for the schedule used
    sides: list = field(default_factory=list)
    offsets: list = field(default_factory=list)
    _axis_data: list = field(default_factory=list, repr=False)

    def all_cubes(self) -> list:
        return [c for st in self.stages for c in st]

    def provenance(self, stage: int, index: int) -> list:
        """Tiling cubes C_n, C_{n+1}, ... (one per later tiling) that the cube was cut from."""
        per_axis_runs, per_axis_chain = zip(*[ad[stage] for ad in self._axis_data])
        sizes = [len(r) for r in per_axis_runs]
        idx = []
        rem = index
        for s in reversed(sizes):
            rem, i = divmod(rem, s)
            idx.append(i)
        idx.reverse()
        chains = [per_axis_chain[a][i] for a, i in enumerate(idx)]
        out = []
        for j in range(len(chains[0])):
            out.append(CubeSpec(tuple(ch[j][0] for ch in chains),
                                tuple(ch[j][1] - 1 for ch in chains)))
        return out

    def to_dict(self) -> dict:
        return {
            "ambient": self.ambient.to_dict(),
            "stages": [{"n": n, "side": s, "cubes": [c.to_dict() for c in st]}
                       for n, s, st in zip(self.stage_params, self.sides, self.stages)],
            "coverage": self.coverage,
            "bound": self.bound,
            "truncation_deficit": self.truncation_deficit,
            "schedule_bound": self.schedule_bound,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NestedFamily":
        amb = AmbientGrid.from_dict(data["ambient"])
        stages = [[CubeSpec.from_dict(c) for c in st["cubes"]] for st in data["stages"]]
        return cls(amb, [st["n"] for st in data["stages"]], stages,
                   float(data.get("coverage", 0.0)), float(data.get("bound", 0.0)),
                   float(data.get("truncation_deficit", 0.0)),
                   float(data.get("schedule_bound", 0.0)),
                   [st.get("side") for st in data["stages"]])


def _labels(N: int, segs: list, shrink: int, torus: bool) -> np.ndarray:
    lab = np.full(N, -1, dtype=np.int64)
    for i, (s, L) in enumerate(segs):
        if L - 2 * shrink <= 0:
            continue
        idx = np.arange(s + shrink, s + L - shrink)
        lab[idx % N if torus else idx] = i
    return lab


def _runs(lab: np.ndarray, torus: bool) -> list:
    """Maximal runs of equal nonnegative labels: (start, length, label)."""
    N = len(lab)
    if N == 0:
        return []
    if torus and lab[0] >= 0 and np.all(lab == lab[0]):
        return [(0, N, int(lab[0]))]
    start = 0
    if torus:
        change = np.nonzero(lab != np.roll(lab, 1))[0]
        start = int(change[0]) if len(change) else 0
    rot = np.roll(lab, -start)
    out = []
    i = 0
    while i < N:
        j = i
        while j + 1 < N and rot[j + 1] == rot[i]:
            j += 1
        if rot[i] >= 0:
            out.append(((i + start) % N, j - i + 1, int(rot[i])))
        i = j + 1
    return sorted(out)


def _axis_family(N: int, stage_segs: list, torus: bool, m0_back: int) -> list:
    """Per-axis F_n for every stage: (runs, chains) where chains name the source segments."""
    count = len(stage_segs)
    result = []
    for si in range(count):
        m_max = count - si
        history = []
        comp = None
        for j in range(m_max):
            lab = _labels(N, stage_segs[si + j], j + 1, torus)
            if comp is None:
                comp = lab[:, None]
            else:
                comp = np.concatenate([comp, lab[:, None]], axis=1)
            comp[(comp < 0).any(axis=1)] = -1
            history.append(comp.copy())
        keep = None
        last = {}
        for comp_m in history[max(0, m_max - m0_back):]:
            uniq, inv = np.unique(comp_m, axis=0, return_inverse=True)
            lab = inv.reshape(-1).astype(np.int64)
            for b in np.nonzero((uniq < 0).any(axis=1))[0]:
                lab[lab == b] = -1
            last = {(s, L): tuple(int(v) for v in comp_m[s]) for s, L, _ in _runs(lab, torus)}
            keep = set(last) if keep is None else keep & set(last)
        runs_sorted = sorted(keep)
        chains = [[stage_segs[si + j][sid] for j, sid in enumerate(last[r])]
                  for r in runs_sorted]
        result.append((runs_sorted, chains))
    return result


def nested_family(ambient: AmbientGrid, n0: int, stage_count: int,
                  side_schedule: Callable[[int], int] | None = None, seed: int = 0,
                  persistence: int = 1) -> NestedFamily:
    """Stages F_{n0}, ..., F_{n0+stage_count-1} from seeded product tilings.

    S_n^m is the meet of Int^{j+1} S_{n+j} for j < m; the liminf is truncated
    at the last available tiling, and a cube enters F_n when it appears in the
    last ``persistence`` iterates S_n^m.
    """
    if stage_count < 1 or n0 < 1:
        raise ValueError("need n0 >= 1 and stage_count >= 1")
    if ambient.d == 0:
        raise AmbientError("nested families need d >= 1")
    sched = side_schedule or cubic_schedule
    torus = ambient.kind == TORUS
    rng = random.Random(seed)
    params = list(range(n0, n0 + stage_count))
    sides = [int(sched(n)) for n in params]
    offsets = []
    per_axis_segs = [[] for _ in range(ambient.d)]
    for s in sides:
        offs = []
        for a, N in enumerate(ambient.sides):
            if s > N:
                raise AmbientError(f"schedule side {s} exceeds ambient side {N}")
            o = rng.randrange(N) if torus else 0
            offs.append(o)
            per_axis_segs[a].append(axis_segments(N, s, o, torus))
        offsets.append(offs)
    axis_data = [_axis_family(N, per_axis_segs[a], torus, persistence)
                 for a, N in enumerate(ambient.sides)]
    stages = []
    masks = []
    for si in range(stage_count):
        runs_per_axis = [axis_data[a][si][0] for a in range(ambient.d)]
        stages.append([CubeSpec(tuple(s for s, _ in combo), tuple(L - 1 for _, L in combo))
                       for combo in product(*runs_per_axis)])
        axis_masks = []
        for a, N in enumerate(ambient.sides):
            m = np.zeros(N, dtype=bool)
            for s, L in runs_per_axis[a]:
                idx = np.arange(s, s + L)
                m[idx % N if torus else idx] = True
            axis_masks.append(m)
        masks.append(reduce(np.multiply.outer, axis_masks))
    covered = reduce(np.logical_or, masks)
    coverage = float(covered.mean())
    d = ambient.d
    n_last = params[-1]
    partial = sum(3 / k ** 2 for k in range(n0, n_last + 1))
    tail = math.pi ** 2 / 2 - sum(3 / k ** 2 for k in range(1, n_last + 1))
    sched_loss = sum(min(1.0, 2 * (j + 1) / s) for j, s in enumerate(sides))
    return NestedFamily(ambient, params, stages, coverage, 1 - d * partial, d * tail,
                        1 - d * sched_loss, sides, offsets, axis_data)


def _nbhd_arc(s: int, L: int, N: int, torus: bool) -> tuple:
    if torus:
        return ((s - 1) % N, L + 2) if L + 2 < N else (0, N)
    lo, hi = max(0, s - 1), min(N, s + L + 1)
    return (lo, hi - lo)


def _arc_contains(outer: tuple, inner: tuple, N: int, torus: bool) -> bool:
    (s1, l1), (s2, l2) = outer, inner
    if torus:
        if l1 >= N:
            return True
        return (s2 - s1) % N + l2 <= l1
    return s1 <= s2 and s2 + l2 <= s1 + l1


def _arcs_meet(a: tuple, b: tuple, N: int, torus: bool) -> bool:
    (s1, l1), (s2, l2) = a, b
    if torus:
        return (s2 - s1) % N < l1 or (s1 - s2) % N < l2
    return max(s1, s2) < min(s1 + l1, s2 + l2)


def nested_pair_ok(ambient: AmbientGrid, c: CubeSpec, e: CubeSpec) -> bool:
    """The two nestedness clauses for a pair of distinct cubes."""
    torus = ambient.kind == TORUS
    arcs_c = [(s, k + 1) for s, k in zip(c.corner, c.extents)]
    arcs_e = [(s, k + 1) for s, k in zip(e.corner, e.extents)]
    Ns = ambient.sides
    nb_c = [_nbhd_arc(s, L, N, torus) for (s, L), N in zip(arcs_c, Ns)]
    nb_e = [_nbhd_arc(s, L, N, torus) for (s, L), N in zip(arcs_e, Ns)]
    intersect = all(_arcs_meet(a, b, N, torus) for a, b, N in zip(arcs_c, arcs_e, Ns))
    if not intersect:
        return not all(_arcs_meet(a, b, N, torus) for a, b, N in zip(nb_c, nb_e, Ns))
    return (all(_arc_contains(b, a, N, torus) for a, b, N in zip(nb_c, arcs_e, Ns))
            or all(_arc_contains(a, b, N, torus) for a, b, N in zip(arcs_c, nb_e, Ns)))


def nestedness_violations(ambient: AmbientGrid, cubes: list, limit: int = 10) -> list:
    """Index pairs of cubes breaking nestedness; candidate pairs found by bucketing."""
    if not cubes:
        return []
    torus = ambient.kind == TORUS
    cell = max(2, min(min(k + 3 for k in c.extents) for c in cubes))
    buckets: dict = {}
    for idx, c in enumerate(cubes):
        ranges = []
        for s, k, N in zip(c.corner, c.extents, ambient.sides):
            lo = s - 1
            hi = s + k + 1
            cells = {((x % N) if torus else min(max(x, 0), N - 1)) // cell
                     for x in range(lo, hi + 1, 1)} if hi - lo < 3 * cell else None
            if cells is None:
                cells = set()
                x = lo
                while x <= hi:
                    cells.add(((x % N) if torus else min(max(x, 0), N - 1)) // cell)
                    x += cell
                cells.add(((hi % N) if torus else min(max(hi, 0), N - 1)) // cell)
            ranges.append(sorted(cells))
        for key in product(*ranges):
            buckets.setdefault(key, []).append(idx)
    seen = set()
    bad = []
    for members in buckets.values():
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                a, b = members[i], members[j]
                if (a, b) in seen:
                    continue
                seen.add((a, b))
                if cubes[a] == cubes[b]:
                    continue
                if not nested_pair_ok(ambient, cubes[a], cubes[b]):
                    bad.append((a, b))
                    if len(bad) >= limit:
                        return bad
    return bad


# -- invariant cores -----------------------------------------------------------

@dataclass
class TileCore:
    tile: set
    core: set
    k: int
    delta_star: float
    K_size: int

    def bound_holds(self) -> bool:
        """|F(K)| > |F| (1 - delta* |K|), the strict core estimate."""
        return len(self.core) > len(self.tile) * (1 - self.delta_star * self.K_size)


def group_ball_size(ambient: AmbientGrid, k: int) -> int:
    """Number of group elements of word length <= k in Z^d x Delta."""
    return len(ambient.ball_offsets(k))


def invariant_core(ambient: AmbientGrid, F: Iterable, k: int) -> TileCore:
    """F(K) for K the radius-k ball, plus delta* = |KF \\ F| / |F|."""
    F = set(F)
    if not F:
        return TileCore(set(), set(), k, 0.0, group_ball_size(ambient, k))
    offsets = ambient.ball_offsets(k)
    core = set()
    for p in F:
        if all(q is None or q in F for q in (ambient.translate(p, t, dl) for t, dl in offsets)):
            core.add(p)
    KF = ball(ambient, F, k)
    return TileCore(F, core, k, len(KF - F) / len(F), len(offsets))


def _axis_profile(ambient: AmbientGrid, axis: int, s: int, L: int, k: int) -> tuple:
    """Per-axis data for a box side: counts of coordinates at distance j (j<=k)
    from the interval, and the coordinates of the interval whose k-window stays inside."""
    N = ambient.sides[axis]
    torus = ambient.kind == TORUS
    inside = set((s + o) % N if torus else s + o for o in range(L))
    counts = [0] * (k + 1)
    counts[0] = len(inside)
    for x in range(N):
        if x in inside:
            continue
        if torus:
            dist = min(min((x - y) % N, (y - x) % N) for y in (s % N, (s + L - 1) % N))
        else:
            dist = s - x if x < s else x - (s + L - 1)
        if dist <= k:
            counts[dist] += 1
    core = 0
    for o in range(L):
        x = s + o
        ok = True
        for j in range(1, k + 1):
            for y in (x - j, x + j):
                if torus:
                    if y % N not in inside:
                        ok = False
                elif 0 <= y < N and y not in inside:
                    ok = False
        core += ok
    return counts, core


def cube_core_stats(ambient: AmbientGrid, cube: CubeSpec, k: int) -> tuple:
    """(|F|, |F(K)|, |KF \\ F|) for a cube with full fibres, without enumerating points."""
    poly = np.array([1], dtype=object)
    core = 1
    for axis, (s, e) in enumerate(zip(cube.corner, cube.extents)):
        counts, c = _axis_profile(ambient, axis, s, e + 1, k)
        poly = np.convolve(poly, np.array(counts, dtype=object))
        core *= c
    total = int(sum(poly[: k + 1]))
    size = cube.volume
    m = ambient.delta_size
    return size * m, core * m, (total - size) * m


def cube_core(ambient: AmbientGrid, cube: CubeSpec, k: int) -> TileCore:
    """invariant_core for a cube, computed axis by axis."""
    size, _, grow = cube_core_stats(ambient, cube, k)
    return TileCore(cube_points(ambient, cube), _cube_core_points(ambient, cube, k), k,
                    grow / size, group_ball_size(ambient, k))


def _cube_core_points(ambient: AmbientGrid, cube: CubeSpec, k: int) -> set:
    torus = ambient.kind == TORUS
    axes = []
    for axis, (s, e) in enumerate(zip(cube.corner, cube.extents)):
        N = ambient.sides[axis]
        inside = set((s + o) % N if torus else s + o for o in range(e + 1))
        keep = []
        for o in range(e + 1):
            x = s + o
            ok = True
            for j in range(1, k + 1):
                for y in (x - j, x + j):
                    if torus:
                        ok &= (y % N) in inside
                    elif 0 <= y < N:
                        ok &= y in inside
            if ok:
                keep.append(x % N if torus else x)
        axes.append(keep)
    fibres = list(product(*(range(m) for m in ambient.delta_orders)))
    return {g + f for g in product(*axes) for f in fibres}
