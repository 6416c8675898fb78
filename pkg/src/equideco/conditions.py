"""Discrepancy, equidistribution scans and k-Hall checking."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

from .lattice import AmbientGrid, Point, TORUS


@dataclass(frozen=True)
class SiteFunction:
    """Bounded integer function on ambient points; absent points are 0."""

    ambient: AmbientGrid
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {tuple(p): int(v) for p, v in self.values.items() if int(v) != 0}
        for p in clean:
            if not self.ambient.contains(p):
                raise ValueError(f"point {p} outside ambient")
        object.__setattr__(self, "values", clean)

    def __getitem__(self, p: Point) -> int:
        return self.values.get(p, 0)

    @property
    def bound(self) -> int:
        return max((abs(v) for v in self.values.values()), default=0)

    def total(self) -> int:
        return sum(self.values.values())

    def positive(self) -> list:
        return sorted(p for p, v in self.values.items() if v > 0)

    def negative(self) -> list:
        return sorted(p for p, v in self.values.items() if v < 0)

    @classmethod
    def from_sets(cls, ambient: AmbientGrid, A: Iterable, B: Iterable) -> "SiteFunction":
        vals: dict = {}
        for p in A:
            vals[tuple(p)] = vals.get(tuple(p), 0) + 1
        for p in B:
            vals[tuple(p)] = vals.get(tuple(p), 0) - 1
        return cls(ambient, vals)


@dataclass
class DiscrepancyReport:
    n_values: list
    worst: list
    fitted_c: float
    skipped: list  # base points whose cube left a window, per n

    def to_dict(self) -> dict:
        return {
            "n_values": self.n_values,
            "worst_discrepancy": self.worst,
            "fitted_c": self.fitted_c,
            "skipped_base_points": self.skipped,
        }


@dataclass
class HallVerdict:
    satisfied: bool
    k: int
    witness: list = field(default_factory=list)
    side: str = ""  # "positive" (first inequality) or "negative" (second)
    lhs: int = 0
    rhs: int = 0

    def to_dict(self) -> dict:
        return {
            "satisfied": self.satisfied,
            "k": self.k,
            "witness": [list(p) for p in self.witness],
            "failed_inequality": self.side or None,
            "lhs": self.lhs,
            "rhs": self.rhs,
        }


def discrepancy(ambient: AmbientGrid, F: Iterable, A: Iterable) -> float:
    """| |A n F| / |F| - mu(A) | with mu the normalized counting measure."""
    F = set(F)
    if not F:
        raise ValueError("discrepancy needs a nonempty window")
    A = set(A)
    return abs(len(A & F) / len(F) - len(A) / len(ambient))


def _fibre_counts(ambient: AmbientGrid, A: Iterable) -> np.ndarray:
    counts = np.zeros(ambient.sides, dtype=np.int64)
    for p in A:
        counts[tuple(p[: ambient.d])] += 1
    return counts


def _box_sums(counts: np.ndarray, n: int, torus: bool) -> np.ndarray:
    """Sums over every box of n+1 points per axis, indexed by base corner."""
    out = counts
    for axis in range(counts.ndim):
        if torus:
            ext = np.concatenate([out, np.take(out, range(n), axis=axis)], axis=axis)
        else:
            ext = out
        c = np.cumsum(ext, axis=axis)
        zero_shape = list(c.shape)
        zero_shape[axis] = 1
        c = np.concatenate([np.zeros(zero_shape, dtype=c.dtype), c], axis=axis)
        length = counts.shape[axis] if torus else counts.shape[axis] - n
        hi = np.take(c, range(n + 1, n + 1 + length), axis=axis)
        lo = np.take(c, range(0, length), axis=axis)
        out = hi - lo
    return out


def equidistribution_report(ambient: AmbientGrid, A: Iterable, n_max: int,
                            n_min: int = 1) -> DiscrepancyReport:
    """Worst discrepancy of A over all cubes [0,n]^d x Delta, for n_min <= n <= n_max."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    A = set(A)
    mu = len(A) / len(ambient)
    torus = ambient.kind == TORUS
    ns, worst, skipped = [], [], []
    if ambient.d == 0:
        for n in range(n_min, n_max + 1):
            ns.append(n)
            worst.append(0.0)
            skipped.append(0)
        return DiscrepancyReport(ns, worst, 0.0, skipped)
    counts = _fibre_counts(ambient, A)
    for n in range(n_min, n_max + 1):
        for s in ambient.sides:
            if (torus and n >= s) or (not torus and n + 1 > s):
                raise ValueError(f"cube side n={n} exceeds ambient side {s}")
        vol = (n + 1) ** ambient.d * ambient.delta_size
        sums = _box_sums(counts, n, torus)
        dev = np.abs(sums / vol - mu)
        ns.append(n)
        worst.append(float(dev.max()))
        skipped.append(0 if torus else ambient.grid_size - int(sums.size))
    fitted = max(n * w for n, w in zip(ns, worst))
    return DiscrepancyReport(ns, worst, float(fitted), skipped)


def _transship(ambient: AmbientGrid, supply: dict, demand: dict, k: int):
    """Max-flow from supply sites to demand sites within distance k.

    Returns (saturated, witness, lhs, rhs).  The witness is the set of
    supply sites on the source side of a minimum cut.
    """
    src = sorted(supply)
    dst = sorted(demand)
    total = sum(supply.values())
    if total == 0:
        return True, [], 0, 0
    if not dst:
        return False, src, total, 0
    didx = {p: 2 + len(src) + j for j, p in enumerate(dst)}
    offsets = ambient.ball_offsets(k)
    rows, cols, caps = [], [], []
    big = total + 1
    for i, p in enumerate(src):
        rows.append(0)
        cols.append(2 + i)
        caps.append(supply[p])
        near = {ambient.translate(p, t, dl) for t, dl in offsets}
        for q in sorted(q for q in near if q in didx):
            rows.append(2 + i)
            cols.append(didx[q])
            caps.append(big)
    for p in dst:
        rows.append(didx[p])
        cols.append(1)
        caps.append(demand[p])
    n = 2 + len(src) + len(dst)
    graph = csr_matrix((np.array(caps, dtype=np.int32), (rows, cols)), shape=(n, n))
    res = maximum_flow(graph, 0, 1)
    if res.flow_value == total:
        return True, [], 0, 0
    flow = res.flow.tocsr()
    residual = (graph - flow).tocoo()
    back = flow.tocoo()
    adj: dict = {}
    for u, v, c in zip(residual.row, residual.col, residual.data):
        if c > 0:
            adj.setdefault(u, []).append(v)
    for u, v, c in zip(back.row, back.col, back.data):
        if c > 0:  # flow u->v lets residual go v->u
            adj.setdefault(v, []).append(u)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj.get(u, ()):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    witness = [p for i, p in enumerate(src) if 2 + i in seen]
    lhs = sum(supply[p] for p in witness)
    reach = set()
    for p in witness:
        reach.update(q for q in (ambient.translate(p, t, dl) for t, dl in offsets) if q in didx)
    rhs = sum(demand[q] for q in reach)
    return False, witness, lhs, rhs


def check_k_hall(f: SiteFunction, k: int) -> HallVerdict:
    """Decide the k-Hall condition for an integer function via two max-flows."""
    if k < 1:
        raise ValueError("k must be >= 1")
    pos = {p: v for p, v in f.values.items() if v > 0}
    neg = {p: -v for p, v in f.values.items() if v < 0}
    ok, wit, lhs, rhs = _transship(f.ambient, pos, neg, k)
    if not ok:
        return HallVerdict(False, k, wit, "positive", lhs, rhs)
    ok, wit, lhs, rhs = _transship(f.ambient, neg, pos, k)
    if not ok:
        return HallVerdict(False, k, wit, "negative", lhs, rhs)
    return HallVerdict(True, k)


def check_k_hall_sets(ambient: AmbientGrid, A: Iterable, B: Iterable, k: int) -> HallVerdict:
    """k-Hall condition for a pair of sets.

    For disjoint A, B this is check_k_hall(chi_A - chi_B).  Overlapping
    points are allowed to pair with themselves, so the pair is lifted to a
    two-layer copy where A and B never share a site.
    """
    A = sorted(set(map(tuple, A)))
    B = sorted(set(map(tuple, B)))
    if not set(A) & set(B):
        return check_k_hall(SiteFunction.from_sets(ambient, A, B), k)
    # tag A as layer 0 and B as layer 1; a shared site pairs with itself at cost 0
    sup = {(p, 0): 1 for p in A}
    dem = {(p, 1): 1 for p in B}
    verdict = _sets_transship(ambient, sup, dem, k)
    if not verdict[0]:
        wit = [p for p, _ in verdict[1]]
        return HallVerdict(False, k, wit, "positive", verdict[2], verdict[3])
    verdict = _sets_transship(ambient, {(p, 1): 1 for p in B}, {(p, 0): 1 for p in A}, k)
    if not verdict[0]:
        wit = [p for p, _ in verdict[1]]
        return HallVerdict(False, k, wit, "negative", verdict[2], verdict[3])
    return HallVerdict(True, k)


def _sets_transship(ambient: AmbientGrid, supply: dict, demand: dict, k: int):
    src = sorted(supply)
    dst = sorted(demand)
    didx = {q: 2 + len(src) + j for j, (q, _) in enumerate(dst)}
    offsets = ambient.ball_offsets(k)
    rows, cols, caps = [], [], []
    for i, (p, _) in enumerate(src):
        rows.append(0)
        cols.append(2 + i)
        caps.append(1)
        near = {ambient.translate(p, t, dl) for t, dl in offsets}
        for q in sorted(q for q in near if q in didx):
            rows.append(2 + i)
            cols.append(didx[q])
            caps.append(1)
    for q, _ in dst:
        rows.append(didx[q])
        cols.append(1)
        caps.append(1)
    n = 2 + len(src) + len(dst)
    if not src:
        return True, [], 0, 0
    graph = csr_matrix((np.array(caps, dtype=np.int32), (rows, cols)), shape=(n, n))
    res = maximum_flow(graph, 0, 1)
    if res.flow_value == len(src):
        return True, [], 0, 0
    flow = res.flow.tocsr()
    residual = (graph - flow).tocoo()
    back = flow.tocoo()
    adj: dict = {}
    for u, v, c in zip(residual.row, residual.col, residual.data):
        if c > 0:
            adj.setdefault(u, []).append(v)
    for u, v, c in zip(back.row, back.col, back.data):
        if c > 0:
            adj.setdefault(v, []).append(u)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj.get(u, ()):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    witness = [s for i, s in enumerate(src) if 2 + i in seen]
    reach = set()
    for p, _ in witness:
        reach.update(q for q in (ambient.translate(p, t, dl) for t, dl in offsets) if q in didx)
    return False, witness, len(witness), len(reach)
