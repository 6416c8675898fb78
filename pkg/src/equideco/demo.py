"""Circle-squaring demo: shapes on the unit torus sampled along a Z^2 orbit."""
from __future__ import annotations

import math
import random
import warnings
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .conditions import equidistribution_report
from .equidecomp import DecomposeResult, decompose
from .lattice import AmbientGrid, make_ambient, WINDOW
from .rounding import RoundingTrace

GOLDEN_ACTION = ((0.6180339887, 0.4142135624), (0.7320508076, 0.2360679775))


@dataclass
class ShapeSpec:
    kind: str  # "disk" | "rectangle" | "bitmap" | "full" | "empty"
    params: dict = field(default_factory=dict)
    action: tuple = GOLDEN_ACTION

    def contains(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Membership of torus points given as coordinate arrays in [0, 1)."""
        if self.kind == "full":
            return np.ones_like(x, dtype=bool)
        if self.kind == "empty":
            return np.zeros_like(x, dtype=bool)
        if self.kind == "disk":
            cx, cy = self.params["center"]
            r = self.params["radius"]
            dx = (x - cx + 0.5) % 1.0 - 0.5
            dy = (y - cy + 0.5) % 1.0 - 0.5
            return dx * dx + dy * dy < r * r
        if self.kind == "rectangle":
            (x0, y0), (x1, y1) = self.params["corners"]
            return (x >= x0) & (x < x1) & (y >= y0) & (y < y1)
        if self.kind == "bitmap":
            grid = np.asarray(self.params["bitmap"], dtype=bool)
            h, w = grid.shape
            return grid[(y * h).astype(int) % h, (x * w).astype(int) % w]
        raise ValueError(f"unknown shape kind {self.kind!r}")

    def area(self) -> float:
        if self.kind == "full":
            return 1.0
        if self.kind == "empty":
            return 0.0
        if self.kind == "disk":
            return math.pi * self.params["radius"] ** 2
        if self.kind == "rectangle":
            (x0, y0), (x1, y1) = self.params["corners"]
            return max(0.0, x1 - x0) * max(0.0, y1 - y0)
        grid = np.asarray(self.params["bitmap"], dtype=bool)
        return float(grid.mean())


def disk(area: float, center=(0.5, 0.5), action=GOLDEN_ACTION) -> ShapeSpec:
    return ShapeSpec("disk", {"center": center, "radius": math.sqrt(area / math.pi)}, action)


def square(area: float, center=(0.5, 0.5), action=GOLDEN_ACTION) -> ShapeSpec:
    h = math.sqrt(area) / 2
    cx, cy = center
    return ShapeSpec("rectangle", {"corners": ((cx - h, cy - h), (cx + h, cy + h))}, action)


def integer_relation(action, bound: int = 12, tol: float = 1e-9):
    """A small nonzero integer vector a with sum a_i t_i in Z^2, or None."""
    vecs = np.asarray(action, dtype=float)
    for a in product(range(-bound, bound + 1), repeat=len(vecs)):
        if not any(a):
            continue
        s = np.asarray(a) @ vecs
        if np.all(np.abs(s - np.round(s)) < tol):
            return a
    return None


def rasterize_orbit(shape: ShapeSpec, base=(0.0, 0.0), window=(64, 64)) -> list:
    """Window points v with base + sum v_i t_i (mod 1) inside the shape."""
    rel = integer_relation(shape.action)
    if rel is not None:
        warnings.warn(f"action vectors look rationally dependent (relation {rel})",
                      stacklevel=2)
    t = np.asarray(shape.action, dtype=float)
    if t.shape[0] != len(window):
        raise ValueError("need one action vector per window axis")
    grids = np.meshgrid(*(np.arange(n) for n in window), indexing="ij")
    pos = np.asarray(base, dtype=float).reshape(1, -1)
    coords = np.stack([g.ravel() for g in grids], axis=1) @ t + pos
    coords %= 1.0
    inside = shape.contains(coords[:, 0], coords[:, 1])
    pts = np.stack([g.ravel() for g in grids], axis=1)[inside]
    return sorted(tuple(int(c) for c in p) for p in pts)


@dataclass
class DemoResult:
    ambient: AmbientGrid
    A: list
    B: list
    dropped: list
    result: DecomposeResult
    discrepancy: dict
    trace: RoundingTrace


def demo_circle_square(size: int = 64, k: int = 2, seed: int = 0, area: float = 0.25,
                       balance: bool = True, adapt_k: bool = False,
                       base=(0.0, 0.0), action=GOLDEN_ACTION) -> DemoResult:
    """Disk against square of equal area on a size x size orbit window.

    The rasters rarely have equal counts; with balance the larger set
    loses randomly chosen points (seeded) so the pipeline can run.
    """
    amb = make_ambient(WINDOW, (size, size))
    A = rasterize_orbit(disk(area, action=action), base, (size, size))
    B = rasterize_orbit(square(area, action=action), base, (size, size))
    dropped = []
    if balance and len(A) != len(B):
        rng = random.Random(seed)
        big = A if len(A) > len(B) else B
        extra = len(big) - min(len(A), len(B))
        dropped = sorted(rng.sample(big, extra))
        gone = set(dropped)
        big[:] = [p for p in big if p not in gone]
    disc = {}
    if size > 1 and A and B:
        for name, S in (("A", A), ("B", B)):
            disc[name] = equidistribution_report(amb, S, min(size - 1, 32)).to_dict()
    trace = RoundingTrace()
    res = decompose(amb, A, B, k, adapt_k=adapt_k, trace=trace)
    return DemoResult(amb, A, B, dropped, res, disc, trace)
