"""Finite grid ambients: discrete tori and rectangular windows of Z^d,
optionally crossed with a finite abelian factor Z/m_1 x ... x Z/m_r.

A point is a plain tuple of ints: the d grid coordinates followed by the
r residues of the finite factor.  Oriented edges are stored positively,
as ``(base_point, axis)`` meaning ``base -> base + e_axis``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Iterator

Point = tuple
Edge = tuple  # (Point, axis)

TORUS = "torus"
WINDOW = "window"


class AmbientError(ValueError):
    pass


@dataclass(frozen=True)
class AmbientGrid:
    kind: str
    sides: tuple
    delta_orders: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "sides", tuple(int(s) for s in self.sides))
        object.__setattr__(self, "delta_orders", tuple(int(m) for m in self.delta_orders))
        if self.kind not in (TORUS, WINDOW):
            raise AmbientError(f"unknown ambient kind {self.kind!r}")
        if not self.sides and not self.delta_orders:
            raise AmbientError("ambient needs at least one side or a nontrivial finite factor")
        for s in self.sides:
            if s < 1:
                raise AmbientError(f"side {s} must be >= 1")
            if self.kind == TORUS and s < 2:
                raise AmbientError(f"torus side {s} < 2 gives degenerate edges")
        for m in self.delta_orders:
            if m < 1:
                raise AmbientError(f"finite factor order {m} must be >= 1")

    # -- basic shape -------------------------------------------------------
    @property
    def d(self) -> int:
        return len(self.sides)

    @property
    def r(self) -> int:
        return len(self.delta_orders)

    @property
    def shape(self) -> tuple:
        return self.sides + self.delta_orders

    @property
    def delta_size(self) -> int:
        n = 1
        for m in self.delta_orders:
            n *= m
        return n

    @property
    def grid_size(self) -> int:
        n = 1
        for s in self.sides:
            n *= s
        return n

    def __len__(self) -> int:
        return self.grid_size * self.delta_size

    @property
    def is_torus(self) -> bool:
        return self.kind == TORUS

    def points(self) -> Iterator[Point]:
        """All points in lexicographic order (finite factor last)."""
        return product(*(range(n) for n in self.shape))

    def grid_points(self) -> Iterator[Point]:
        return product(*(range(n) for n in self.sides))

    def contains(self, p: Point) -> bool:
        if len(p) != self.d + self.r:
            return False
        return all(0 <= c < n for c, n in zip(p, self.shape))

    def index(self, p: Point) -> int:
        i = 0
        for c, n in zip(p, self.shape):
            i = i * n + c
        return i

    def point_at(self, i: int) -> Point:
        out = []
        for n in reversed(self.shape):
            i, c = divmod(i, n)
            out.append(c)
        return tuple(reversed(out))

    def quotient(self) -> "AmbientGrid":
        """The same grid with the finite factor divided out."""
        return AmbientGrid(self.kind, self.sides, ())

    def grid_part(self, p: Point) -> Point:
        return tuple(p[: self.d])

    # -- moves -------------------------------------------------------------
    def shift(self, p: Point, axis: int, step: int) -> Point | None:
        """Move along a grid axis; None when leaving a window."""
        c = p[axis] + step
        n = self.sides[axis]
        if self.kind == TORUS:
            c %= n
        elif not 0 <= c < n:
            return None
        return p[:axis] + (c,) + p[axis + 1:]

    def translate(self, p: Point, t: Iterable[int], delta: Iterable[int] = ()) -> Point | None:
        """Apply a group element (grid translation, finite-factor shift)."""
        coords = []
        for c, dt, n in zip(p[: self.d], t, self.sides):
            c += dt
            if self.kind == TORUS:
                c %= n
            elif not 0 <= c < n:
                return None
            coords.append(c)
        delta = tuple(delta) or (0,) * self.r
        res = tuple((c + s) % m for c, s, m in zip(p[self.d:], delta, self.delta_orders))
        return tuple(coords) + res

    def generators(self) -> list:
        """Schreier generators in the fixed order +e1 < -e1 < +e2 < ... < finite-factor moves.

        Each entry is ``(kind, axis, step)`` with kind "grid" or "delta".
        """
        gens = [("grid", i, s) for i in range(self.d) for s in (1, -1)]
        for j, m in enumerate(self.delta_orders):
            if m == 2:
                gens.append(("delta", j, 1))
            elif m > 2:
                gens.extend([("delta", j, 1), ("delta", j, -1)])
        return gens

    def neighbors(self, p: Point) -> list:
        """Distinct Schreier-graph neighbours of p, in generator order."""
        out = []
        for kind, axis, step in self.generators():
            if kind == "grid":
                q = self.shift(p, axis, step)
            else:
                j = self.d + axis
                q = p[:j] + ((p[j] + step) % self.delta_orders[axis],) + p[j + 1:]
            if q is not None and q != p and q not in out:
                out.append(q)
        return out

    def axis_offset(self, a: int, b: int, axis: int) -> int:
        """Shortest signed displacement from a to b along a grid axis (ties go +)."""
        n = self.sides[axis]
        if self.kind == WINDOW:
            return b - a
        t = (b - a) % n
        return t if 2 * t <= n else t - n

    def delta_offset(self, a: int, b: int, j: int) -> int:
        m = self.delta_orders[j]
        t = (b - a) % m
        return t if 2 * t <= m else t - m

    def displacement(self, p: Point, q: Point) -> tuple:
        """Minimal-length group element taking p to q: (translation, delta)."""
        t = tuple(self.axis_offset(p[i], q[i], i) for i in range(self.d))
        delta = tuple((q[self.d + j] - p[self.d + j]) % self.delta_orders[j] for j in range(self.r))
        return t, delta

    def delta_length(self, delta: Iterable[int]) -> int:
        total = 0
        for s, m in zip(delta, self.delta_orders):
            s %= m
            total += min(s, m - s)
        return total

    def distance(self, p: Point, q: Point) -> int:
        """Graph distance in the Schreier graph (closed form, product metric)."""
        dist = 0
        for i in range(self.d):
            dist += abs(self.axis_offset(p[i], q[i], i))
        for j in range(self.r):
            dist += abs(self.delta_offset(p[self.d + j], q[self.d + j], j))
        return dist

    def diameter(self) -> int:
        if self.kind == TORUS:
            g = sum(n // 2 for n in self.sides)
        else:
            g = sum(n - 1 for n in self.sides)
        return g + sum(m // 2 for m in self.delta_orders)

    def ball_offsets(self, k: int) -> list:
        """Group elements (t, delta) of word length <= k.

        On small tori distinct elements may act identically; callers that
        need points should dedupe the images.
        """
        out = []
        delta_ranges = [range(m) for m in self.delta_orders]
        deltas = [(dl, self.delta_length(dl)) for dl in product(*delta_ranges)]
        for t in product(range(-k, k + 1), repeat=self.d):
            lt = sum(abs(x) for x in t)
            if lt > k:
                continue
            for delta, ld in deltas:
                if lt + ld <= k:
                    out.append((t, delta))
        return out

    def ball_points(self, p: Point, k: int, offsets: list | None = None) -> list:
        """Points within graph distance k of p, sorted."""
        if offsets is None:
            offsets = self.ball_offsets(k)
        pts = {self.translate(p, t, dl) for t, dl in offsets}
        pts.discard(None)
        return sorted(pts)

    # -- edges -------------------------------------------------------------
    def has_edge(self, p: Point, axis: int) -> bool:
        if self.kind == TORUS:
            return True
        return p[axis] + 1 < self.sides[axis]

    def edge_head(self, e: Edge) -> Point:
        p, axis = e
        return self.shift(p, axis, 1)

    def all_edges(self) -> Iterator[Edge]:
        """Positively oriented grid edges, lexicographic by (base, axis)."""
        for p in self.points():
            for axis in range(self.d):
                if self.has_edge(p, axis):
                    yield (p, axis)

    def edge_count(self) -> int:
        if self.kind == TORUS:
            return self.d * len(self)
        total = 0
        for axis in range(self.d):
            n = self.delta_size
            for i, s in enumerate(self.sides):
                n *= (s - 1) if i == axis else s
            total += n
        return total

    def to_dict(self) -> dict:
        return {"kind": self.kind, "sides": list(self.sides), "delta_orders": list(self.delta_orders)}

    @classmethod
    def from_dict(cls, data: dict) -> "AmbientGrid":
        return make_ambient(data["kind"], data.get("sides", []), data.get("delta_orders", []))


def make_ambient(kind: str, sides: Iterable[int], delta_orders: Iterable[int] = ()) -> AmbientGrid:
    return AmbientGrid(kind, tuple(sides), tuple(delta_orders))


@dataclass(frozen=True)
class CubeSpec:
    """Cube ``corner + prod {0..extents[i]}`` in the grid part of an ambient.

    On a torus the cube may straddle the seam but never wraps onto itself.
    """

    corner: tuple
    extents: tuple

    def __post_init__(self):
        object.__setattr__(self, "corner", tuple(int(c) for c in self.corner))
        object.__setattr__(self, "extents", tuple(int(k) for k in self.extents))
        if len(self.corner) != len(self.extents):
            raise AmbientError("cube corner and extents differ in dimension")
        if any(k < 0 for k in self.extents):
            raise AmbientError("cube extents must be nonnegative")

    @property
    def d(self) -> int:
        return len(self.extents)

    @property
    def side_lengths(self) -> tuple:
        return tuple(k + 1 for k in self.extents)

    @property
    def volume(self) -> int:
        v = 1
        for k in self.extents:
            v *= k + 1
        return v

    def to_dict(self) -> dict:
        return {"corner": list(self.corner), "extents": list(self.extents)}

    @classmethod
    def from_dict(cls, data: dict) -> "CubeSpec":
        return cls(tuple(data["corner"]), tuple(data["extents"]))


def check_cube(ambient: AmbientGrid, cube: CubeSpec) -> None:
    if cube.d != ambient.d:
        raise AmbientError("cube dimension does not match ambient")
    for c, k, n in zip(cube.corner, cube.extents, ambient.sides):
        if not 0 <= c < n:
            raise AmbientError(f"cube corner {cube.corner} outside ambient")
        if ambient.kind == WINDOW and c + k >= n:
            raise AmbientError(f"cube {cube} does not fit in the window")
        if ambient.kind == TORUS and k >= n:
            raise AmbientError(f"cube {cube} wraps onto itself")


def cube_grid_points(ambient: AmbientGrid, cube: CubeSpec) -> list:
    """Grid points of a cube (no finite-factor coordinates), lexicographic in offsets."""
    check_cube(ambient, cube)
    out = []
    for off in product(*(range(k + 1) for k in cube.extents)):
        out.append(tuple((c + o) % n if ambient.kind == TORUS else c + o
                         for c, o, n in zip(cube.corner, off, ambient.sides)))
    return out


def cube_points(ambient: AmbientGrid, cube: CubeSpec) -> set:
    """All ambient points of the cube, finite-factor fibres attached wholesale."""
    fibres = list(product(*(range(m) for m in ambient.delta_orders)))
    return {g + fib for g in cube_grid_points(ambient, cube) for fib in fibres}


def cube_point_at(ambient: AmbientGrid, cube: CubeSpec, offset: Iterable[int]) -> Point | None:
    """Grid point corner + offset (offset may leave the cube); None off a window."""
    out = []
    for c, o, n in zip(cube.corner, offset, ambient.sides):
        x = c + o
        if ambient.kind == TORUS:
            x %= n
        elif not 0 <= x < n:
            return None
        out.append(x)
    return tuple(out)


# -- set operations ----------------------------------------------------------

def edges(ambient: AmbientGrid, A: Iterable[Point]) -> set:
    """Positively oriented grid edges with both endpoints in A."""
    A = set(A)
    out = set()
    for p in A:
        for axis in range(ambient.d):
            if ambient.has_edge(p, axis) and ambient.shift(p, axis, 1) in A:
                out.add((p, axis))
    return out


def edges_plus(ambient: AmbientGrid, A: Iterable[Point]) -> set:
    """Positively oriented grid edges with at least one endpoint in A."""
    out = set()
    for p in set(A):
        for axis in range(ambient.d):
            if ambient.has_edge(p, axis):
                out.add((p, axis))
            q = ambient.shift(p, axis, -1)
            if q is not None and ambient.has_edge(q, axis):
                out.add((q, axis))
    return out


def nbhd(ambient: AmbientGrid, A: Iterable[Point]) -> set:
    """Sup-norm 1-neighbourhood in the grid directions (finite factor untouched)."""
    offsets = list(product((-1, 0, 1), repeat=ambient.d))
    out = set()
    for p in A:
        for off in offsets:
            q = ambient.translate(p, off)
            if q is not None:
                out.add(q)
    return out


def ball(ambient: AmbientGrid, F: Iterable[Point], k: int) -> set:
    """Graph-metric k-ball around F in the Schreier graph (BFS)."""
    if k < 0:
        raise ValueError("radius must be >= 0")
    seen = set(F)
    frontier = deque((p, 0) for p in seen)
    while frontier:
        p, dist = frontier.popleft()
        if dist == k:
            continue
        for q in ambient.neighbors(p):
            if q not in seen:
                seen.add(q)
                frontier.append((q, dist + 1))
    return seen


def interior_boundary(ambient: AmbientGrid, cube: CubeSpec) -> tuple:
    """(interior, boundary) of a cube as point sets."""
    pts = cube_points(ambient, cube)
    if any(k < 2 for k in cube.extents):
        return set(), pts
    inner = CubeSpec(
        cube_point_at(ambient, cube, (1,) * cube.d),
        tuple(k - 2 for k in cube.extents),
    )
    interior = cube_points(ambient, inner)
    return interior, pts - interior


def measure(ambient: AmbientGrid, A: Iterable[Point]) -> float:
    """Normalized counting measure."""
    return len(set(A)) / len(ambient)
