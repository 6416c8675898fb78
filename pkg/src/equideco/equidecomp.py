"""Equidecompositions from the Hall condition.

The pipeline quotients out the finite factor, builds a bounded integer
flow for the quotient function, aggregates it over a cube tiling and then
moves points in two steps: reservoir transfers between adjacent tiles,
followed by a bijection inside every tile.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .conditions import SiteFunction, check_k_hall, check_k_hall_sets, equidistribution_report
from .flows import FlowMap
from .lattice import AmbientError, AmbientGrid, CubeSpec
from .real_flow import InvariantError, build_real_flow
from .rounding import RoundingTrace, make_integer_flow
from .tiling import CubeTiling, segment_lengths, tile_cubes


class DecompositionError(RuntimeError):
    """A pipeline stage could not proceed; carries the stage name and a witness."""

    def __init__(self, stage: str, message: str, witness=None):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.message = message
        self.witness = witness


class ResolveError(DecompositionError):
    def __init__(self, message: str, tile: int):
        super().__init__("resolve", message, tile)
        self.tile = tile


@dataclass(frozen=True, order=True)
class GroupElement:
    """Element (translation, finite-factor residues) of Z^d x Delta."""

    translation: tuple
    delta: tuple = ()

    def word_length(self, ambient: AmbientGrid) -> int:
        return sum(abs(t) for t in self.translation) + ambient.delta_length(self.delta)

    def apply(self, ambient: AmbientGrid, p: tuple):
        return ambient.translate(p, self.translation, self.delta)

    def to_dict(self) -> dict:
        return {"t": list(self.translation), "delta": list(self.delta)}

    @classmethod
    def from_dict(cls, data: dict) -> "GroupElement":
        return cls(tuple(int(x) for x in data["t"]), tuple(int(x) for x in data.get("delta", [])))

    @classmethod
    def between(cls, ambient: AmbientGrid, p: tuple, q: tuple) -> "GroupElement":
        t, dl = ambient.displacement(p, q)
        return cls(tuple(t), tuple(dl))


@dataclass
class PieceAssignment:
    ambient: AmbientGrid
    pieces: list  # [(GroupElement, tuple of points)]
    source: frozenset
    target: frozenset
    movement_bound: int | None = None

    @classmethod
    def from_pairs(cls, ambient: AmbientGrid, pairs: dict, A: Iterable, B: Iterable,
                   movement_bound: int | None = None) -> "PieceAssignment":
        """Group a bijection a -> b into level sets of the displacement."""
        groups: dict = {}
        for a, b in pairs.items():
            groups.setdefault(GroupElement.between(ambient, a, b), []).append(a)
        pieces = [(g, tuple(sorted(pts))) for g, pts in sorted(groups.items())]
        return cls(ambient, pieces, frozenset(A), frozenset(B), movement_bound)

    def mapping(self) -> dict:
        return {p: g.apply(self.ambient, p) for g, pts in self.pieces for p in pts}

    def max_movement(self) -> int:
        return max((g.word_length(self.ambient) for g, _ in self.pieces), default=0)

    def __len__(self) -> int:
        return len(self.pieces)

    def to_dict(self) -> dict:
        return {
            "ambient": self.ambient.to_dict(),
            "movement_bound": self.movement_bound,
            "source": [list(p) for p in sorted(self.source)],
            "target": [list(p) for p in sorted(self.target)],
            "pieces": [{"gamma": g.to_dict(), "points": [list(p) for p in pts]}
                       for g, pts in self.pieces],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PieceAssignment":
        amb = AmbientGrid.from_dict(data["ambient"])
        pieces = [(GroupElement.from_dict(row["gamma"]), tuple(tuple(p) for p in row["points"]))
                  for row in data["pieces"]]
        src = data.get("source")
        tgt = data.get("target")
        pa = cls(amb, pieces, frozenset(), frozenset(), data.get("movement_bound"))
        if src is None:
            src = [p for _, pts in pieces for p in pts]
        if tgt is None:
            tgt = [q for q in pa.mapping().values() if q is not None]
        pa.source = frozenset(tuple(p) for p in src)
        pa.target = frozenset(tuple(p) for p in tgt)
        return pa


@dataclass
class VerifyVerdict:
    ok: bool
    message: str = ""
    point: tuple | None = None
    max_movement: int = 0

    def to_dict(self) -> dict:
        return {"ok": self.ok, "violation": self.message or None,
                "point": list(self.point) if self.point is not None else None,
                "max_movement": self.max_movement}


def verify_decomposition(pieces: PieceAssignment, A: Iterable | None = None,
                         B: Iterable | None = None,
                         movement_bound: int | None = None) -> VerifyVerdict:
    """Check every invariant of a piece assignment; report the first violation."""
    amb = pieces.ambient
    A = set(map(tuple, A)) if A is not None else set(pieces.source)
    B = set(map(tuple, B)) if B is not None else set(pieces.target)
    bound = movement_bound if movement_bound is not None else pieces.movement_bound
    seen: set = set()
    images: set = set()
    worst = 0
    for g, pts in pieces.pieces:
        if len(g.translation) != amb.d or len(g.delta) not in (0, amb.r):
            return VerifyVerdict(False, f"group element {g.to_dict()} has the wrong shape")
        wl = g.word_length(amb)
        worst = max(worst, wl)
        if bound is not None and wl > bound:
            return VerifyVerdict(False, f"piece moves by {wl} > bound {bound}",
                                 pts[0] if pts else None, worst)
        for p in pts:
            if p not in A:
                return VerifyVerdict(False, "piece point outside A", p, worst)
            if p in seen:
                return VerifyVerdict(False, "pieces overlap", p, worst)
            seen.add(p)
            q = g.apply(amb, p)
            if q is None:
                return VerifyVerdict(False, "translated point leaves the ambient", p, worst)
            if q not in B:
                return VerifyVerdict(False, "translated point outside B", q, worst)
            if q in images:
                return VerifyVerdict(False, "translated pieces overlap", q, worst)
            images.add(q)
    missing = sorted(A - seen)
    if missing:
        return VerifyVerdict(False, "pieces do not cover A", missing[0], worst)
    missing = sorted(B - images)
    if missing:
        return VerifyVerdict(False, "translated pieces do not cover B", missing[0], worst)
    return VerifyVerdict(True, "", None, worst)


def restrict_decomposition(pieces: PieceAssignment, Xp: Iterable) -> PieceAssignment:
    """Intersect every piece with an invariant subset X'."""
    amb = pieces.ambient
    Xp = set(map(tuple, Xp))
    for g, _ in pieces.pieces:
        for x in sorted(Xp):
            y = g.apply(amb, x)
            if y is None or y not in Xp:
                raise ValueError(f"subset is not invariant under {g.to_dict()} (point {x})")
    out = []
    for g, pts in pieces.pieces:
        kept = tuple(p for p in pts if p in Xp)
        if kept:
            out.append((g, kept))
    return PieceAssignment(amb, out, frozenset(pieces.source & Xp),
                           frozenset(pieces.target & Xp), pieces.movement_bound)


# -- quotient and tile size ---------------------------------------------------------

def quotient_by_delta(ambient: AmbientGrid, A: Iterable, B: Iterable):
    """Project onto the grid: f(x') = |A in fibre| - |B in fibre|."""
    if ambient.d == 0:
        raise AmbientError("no grid to project onto; use finite_orbit_decompose")
    q = ambient.quotient()
    vals: dict = {}
    for p in A:
        x = tuple(p[: ambient.d])
        vals[x] = vals.get(x, 0) + 1
    for p in B:
        x = tuple(p[: ambient.d])
        vals[x] = vals.get(x, 0) - 1
    return q, SiteFunction(q, vals)


def tile_inequality(n: int, alpha: float, c: float, d: int, k: int, delta_order: int,
                    K: int) -> tuple:
    """Both sides of the tile-size estimate at n."""
    lhs = alpha * (n + 1) ** d * delta_order - c * delta_order * (n + 1) ** d / n
    rhs = K * (n + 1) ** (d - 1) * (delta_order * d ** k + 12 * d)
    return lhs, rhs


def choose_tile_size(alpha: float, c: float, d: int, k: int, delta_order: int, K: int) -> int:
    """Least n >= 1 with alpha(n+1)^d|D| - c|D|(n+1)^d/n >= K(n+1)^(d-1)(|D| d^k + 12d)."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if c < 0:
        raise ValueError("c must be non-negative")
    if d < 1:
        raise ValueError("tile size needs d >= 1")
    # below c/alpha the left side is negative, so start there
    n = max(1, int(c / alpha))
    while True:
        # divided through by (n+1)^(d-1) and multiplied by n
        lhs = alpha * (n + 1) * delta_order * n - c * delta_order * (n + 1)
        rhs = K * n * (delta_order * d ** k + 12 * d)
        if lhs >= rhs:
            return n
        n += 1


def _reservoir_size(n: int, d: int, k: int, delta_order: int) -> int:
    return (n + 1) ** (d - 1) * (delta_order * d ** k + 12 * d)


# -- aggregated flow -------------------------------------------------------------------

@dataclass
class TileFlowGraph:
    tiling: CubeTiling
    adjacency: dict  # tile -> sorted neighbour tiles
    F: list
    psi: dict  # (C, D) -> int, antisymmetric, zero entries omitted
    edge_counts: dict  # (C, D) with C < D -> number of grid edges between them

    @property
    def K(self) -> int:
        return max((len(v) for v in self.adjacency.values()), default=0)

    def __getitem__(self, pair: tuple) -> int:
        return self.psi.get(pair, 0)

    def divergence(self) -> list:
        div = [0] * len(self.tiling.cubes)
        for (C, _), v in self.psi.items():
            div[C] += v
        return div

    def is_antisymmetric(self) -> bool:
        return all(self.psi.get((D, C), 0) == -v for (C, D), v in self.psi.items())

    def max_edge_count(self) -> int:
        return max(self.edge_counts.values(), default=0)

    def to_dict(self) -> dict:
        return {
            "tiles": len(self.tiling.cubes),
            "n": self.tiling.n,
            "K": self.K,
            "F": self.F,
            "psi": [[C, D, v] for (C, D), v in sorted(self.psi.items()) if v > 0],
            "max_edges_between_tiles": self.max_edge_count(),
        }


def aggregate_flow(psi: FlowMap, tiling: CubeTiling, f: SiteFunction | None = None) -> TileFlowGraph:
    """Sum an integer flow over the grid edges between each pair of tiles."""
    if not psi.all_integer():
        raise ValueError("aggregate_flow needs an integer flow")
    amb = tiling.ambient
    owner = tiling.owner_map()
    adjacency: dict = {i: set() for i in range(len(tiling.cubes))}
    counts: dict = {}
    agg: dict = {}
    q = psi.denom
    for e in amb.all_edges():
        p, axis = e
        C = owner[p]
        D = owner[amb.edge_head(e)]
        if C == D:
            continue
        adjacency[C].add(D)
        adjacency[D].add(C)
        key = (min(C, D), max(C, D))
        counts[key] = counts.get(key, 0) + 1
        v = psi.get_num(e) // q
        if v:
            agg[(C, D)] = agg.get((C, D), 0) + v
            agg[(D, C)] = agg.get((D, C), 0) - v
    agg = {k: v for k, v in agg.items() if v}
    F = [0] * len(tiling.cubes)
    if f is not None:
        for p, v in f.values.items():
            F[owner[p]] += v
    else:
        for p, v in psi.divergence().items():
            F[owner[p]] += int(v)
    adj = {i: tuple(sorted(s)) for i, s in adjacency.items()}
    return TileFlowGraph(tiling, adj, F, agg, counts)


# -- two-step resolution ----------------------------------------------------------------

@dataclass
class ResolvedMatching:
    pairs: dict  # a -> b, a bijection A -> B
    transfers: list  # step-one pairs (a, b) across adjacent tiles
    reservoir_size: int | None


def _tile_members(ambient: AmbientGrid, owner: dict, S: Iterable) -> dict:
    out: dict = {}
    for p in sorted(S):
        out.setdefault(owner[tuple(p[: ambient.d])], []).append(p)
    return out


def resolve_tiles(ambient: AmbientGrid, tiling: CubeTiling, A: Iterable, B: Iterable,
                  graph: TileFlowGraph, reservoir_size: int | None = None,
                  lower_bound: int | None = None) -> ResolvedMatching:
    """Two-step bijection A -> B guided by the aggregated flow.

    Step one: when Psi(C, D) > 0, Psi(C, D) points of the A-reservoir of C
    for D are matched to points of the B-reservoir of D for C.  Step two:
    what is left inside each tile is now balanced and is matched
    lexicographically.  Reservoirs are the lexicographically first free
    points, A-reservoirs before B-reservoirs, neighbours in index order.
    reservoir_size fixes the reservoir size (otherwise exactly what the
    transfers need); lower_bound is the required |A n D|, |B n D| per tile.
    """
    owner = tiling.owner_map()
    A_by = _tile_members(ambient, owner, A)
    B_by = _tile_members(ambient, owner, B)
    ntiles = len(tiling.cubes)
    if lower_bound is not None:
        for D in range(ntiles):
            a, b = len(A_by.get(D, ())), len(B_by.get(D, ()))
            if min(a, b) < lower_bound:
                raise ResolveError(
                    f"tile {D} has |A|={a}, |B|={b} below the required {lower_bound}", D)
    a_res: dict = {}
    b_res: dict = {}
    for C in range(ntiles):
        a_pts = A_by.get(C, [])
        b_pts = B_by.get(C, [])
        ia = ib = 0
        for D in graph.adjacency[C]:
            need = max(graph[(C, D)], 0)
            size = need if reservoir_size is None else max(need, reservoir_size)
            if ia + size > len(a_pts):
                raise ResolveError(f"tile {C} has too few A-points for its reservoirs", C)
            a_res[(C, D)] = a_pts[ia: ia + size]
            ia += size
        for D in graph.adjacency[C]:
            need = max(graph[(D, C)], 0)
            size = need if reservoir_size is None else max(need, reservoir_size)
            if ib + size > len(b_pts):
                raise ResolveError(f"tile {C} has too few B-points for its reservoirs", C)
            b_res[(C, D)] = b_pts[ib: ib + size]
            ib += size
    pairs: dict = {}
    transfers = []
    used_b: set = set()
    for (C, D), v in sorted(graph.psi.items()):
        if v <= 0:
            continue
        for a, b in zip(a_res[(C, D)][:v], b_res[(D, C)][:v]):
            pairs[a] = b
            used_b.add(b)
            transfers.append((a, b))
    for C in range(ntiles):
        rest_a = [p for p in A_by.get(C, []) if p not in pairs]
        rest_b = [p for p in B_by.get(C, []) if p not in used_b]
        if len(rest_a) != len(rest_b):
            raise InvariantError(f"tile {C} unbalanced after transfers: "
                                 f"{len(rest_a)} A vs {len(rest_b)} B")
        pairs.update(zip(rest_a, rest_b))
    return ResolvedMatching(pairs, transfers, reservoir_size)


# -- finite orbits ----------------------------------------------------------------------

def finite_orbit_decompose(ambient: AmbientGrid, A: Iterable, B: Iterable) -> PieceAssignment:
    """Lexicographic bijection inside every finite-factor fibre."""
    A = sorted(set(map(tuple, A)))
    B = sorted(set(map(tuple, B)))
    fa: dict = {}
    fb: dict = {}
    for p in A:
        fa.setdefault(p[: ambient.d], []).append(p)
    for p in B:
        fb.setdefault(p[: ambient.d], []).append(p)
    for x in sorted(set(fa) | set(fb)):
        if len(fa.get(x, ())) != len(fb.get(x, ())):
            raise DecompositionError(
                "orbit counts", f"fibre {x} holds {len(fa.get(x, ()))} A-points "
                f"and {len(fb.get(x, ()))} B-points", list(x))
    pairs = {}
    for x in fa:
        pairs.update(zip(fa[x], fb[x]))
    return PieceAssignment.from_pairs(ambient, pairs, A, B, 2 * (ambient.delta_size + 1))


# -- full pipeline ------------------------------------------------------------------------

@dataclass
class DecomposeResult:
    success: bool
    pieces: PieceAssignment | None
    stage: str = ""
    message: str = ""
    witness: object = None
    report: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "success": self.success,
            "failed_stage": self.stage or None,
            "message": self.message or None,
            "witness": self.witness,
            "report": self.report,
            "pieces": self.pieces.to_dict() if self.pieces is not None else None,
        }


def _least_k(test, k0: int, k_max: int):
    """Least k in [k0, k_max] with test(k) true (test is monotone), or None."""
    if test(k0):
        return k0
    lo, hi = k0, k0
    while True:
        if hi >= k_max:
            return None
        lo, hi = hi, min(k_max, 2 * hi)
        if test(hi):
            break
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if test(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _feasible(ambient: AmbientGrid, n: int) -> bool:
    try:
        for N in ambient.sides:
            segment_lengths(N, n)
    except AmbientError:
        return False
    return True


def _whole_tiling(ambient: AmbientGrid) -> CubeTiling:
    cube = CubeSpec((0,) * ambient.d, tuple(N - 1 for N in ambient.sides))
    return CubeTiling(ambient, [cube], max(ambient.sides))


def measured_constant(ambient: AmbientGrid, sets: list) -> float:
    """Largest fitted equidistribution constant over the given sets."""
    if ambient.d == 0:
        return 0.0
    n_max = min(ambient.sides) - 1
    if n_max < 1:
        return 0.0
    return max(equidistribution_report(ambient, S, n_max).fitted_c for S in sets)


def decompose(ambient: AmbientGrid, A: Iterable, B: Iterable, k: int, c: float | None = None,
              adapt_k: bool = False, tile_size: int | None = None,
              check_lower_bound: bool = True, average_paths: bool = True,
              family=None, trace: RoundingTrace | None = None) -> DecomposeResult:
    """Run the full pipeline from a k-Hall pair to verified pieces.

    Stages: Hall check, equidistribution constant, quotient, real flow,
    integer rounding, tile size, aggregation, two-step resolution, pieces.
    With adapt_k the radius is raised to the least k' >= k satisfying the
    Hall condition; otherwise a Hall failure at k is returned with its
    witness.  tile_size forces the tiling side; check_lower_bound=False
    drops the per-tile lower bound and sizes reservoirs by the transfers.
    family is an optional nested cube family on the quotient grid for the
    rounding cascade.
    """
    A = sorted(set(map(tuple, A)))
    B = sorted(set(map(tuple, B)))
    report: dict = {"k_requested": k, "adapt_k": adapt_k}
    for p in A + B:
        if not ambient.contains(p):
            return DecomposeResult(False, None, "input", f"point {p} outside the ambient",
                                   list(p), report)
    if k < 1:
        return DecomposeResult(False, None, "input", "k must be >= 1", None, report)
    if len(A) != len(B):
        return DecomposeResult(False, None, "counts", f"|A|={len(A)} differs from |B|={len(B)}",
                               None, report)
    if ambient.d == 0:
        try:
            pa = finite_orbit_decompose(ambient, A, B)
        except DecompositionError as exc:
            return DecomposeResult(False, None, exc.stage, exc.message, exc.witness, report)
        report.update(n_used=0, movement_bound=pa.movement_bound, piece_count=len(pa),
                      max_movement=pa.max_movement())
        return DecomposeResult(True, pa, report=report)

    # Hall condition
    k_max = max(k, ambient.diameter())
    verdicts: dict = {}

    def hall(kk):
        verdicts[kk] = check_k_hall_sets(ambient, A, B, kk)
        return verdicts[kk].satisfied

    if adapt_k:
        k_hall = _least_k(hall, k, k_max)
    else:
        k_hall = k if hall(k) else None
    if k_hall is None:
        v = verdicts[k]
        report["hall"] = v.to_dict()
        return DecomposeResult(False, None, "hall", f"k-Hall condition fails at k={k}",
                               [list(p) for p in v.witness], report)
    report["k_hall"] = k_hall

    if not A:
        pa = PieceAssignment(ambient, [], frozenset(), frozenset(), 0)
        report.update(piece_count=0, movement_bound=0, max_movement=0)
        return DecomposeResult(True, pa, report=report)

    # equidistribution constant
    measured = measured_constant(ambient, [A, B])
    report["c_measured"] = measured
    if c is not None and measured > c:
        return DecomposeResult(False, None, "equidistribution",
                               f"measured constant {measured:.4g} exceeds c={c}", None, report)
    c_used = measured if c is None else c
    report["c"] = c_used

    # quotient and flows
    q, f = quotient_by_delta(ambient, A, B)
    dsz = ambient.delta_size
    k_f = _least_k(lambda kk: check_k_hall(f, kk).satisfied, k_hall, max(k_hall, q.diameter()))
    if k_f is None:
        raise InvariantError("quotient function fails the Hall condition at the diameter")
    report["k_flow"] = k_f
    orders = None
    if average_paths and q.d > 1:
        orders = [tuple(range(q.d)), tuple(reversed(range(q.d)))]
    try:
        phi, rf = build_real_flow(f, k_f, None, orders)
    except InvariantError as exc:
        raise InvariantError(f"real flow: {exc}") from exc
    report["real_flow"] = rf.to_dict()
    trace = trace if trace is not None else RoundingTrace()
    psi = make_integer_flow(phi, f.values, family, trace)
    report["rounding"] = trace.to_dict()
    if psi.divergence_mismatch(f.values):
        raise InvariantError("integer flow does not have divergence f")
    report["integer_flow_sup"] = str(psi.sup_norm())

    # tile size and resolution
    d = q.d
    alpha = len(A) / len(ambient)
    report["alpha"] = alpha
    n_star = choose_tile_size(alpha, c_used, d, k_f, dsz, 2 * d)
    report["n_star"] = n_star
    if tile_size is not None:
        candidates = [tile_size]
    else:
        candidates = [n for n in range(n_star, max(q.sides) + 1) if _feasible(q, n)]
    attempts = []
    resolved = None
    tiling = graph = None
    for n in candidates:
        try:
            tiling = tile_cubes(q, n)
        except AmbientError as exc:
            if tile_size is not None:
                return DecomposeResult(False, None, "tiling", str(exc), None, report)
            continue
        graph = aggregate_flow(psi, tiling, f)
        if graph.divergence() != graph.F:
            raise InvariantError("aggregated flow divergence differs from F")
        res = _reservoir_size(n, d, k_f, dsz)
        lb = graph.K * res if check_lower_bound else None
        try:
            resolved = resolve_tiles(ambient, tiling, A, B, graph,
                                     res if check_lower_bound else None, lb)
        except ResolveError as exc:
            attempts.append({"n": n, "tile": exc.tile, "reason": exc.message})
            if tile_size is not None:
                report["attempts"] = attempts
                return DecomposeResult(False, None, "resolve", exc.message, exc.tile, report)
            continue
        break
    fallback = resolved is None
    if fallback:
        tiling = _whole_tiling(q)
        graph = aggregate_flow(psi, tiling, f)
        resolved = resolve_tiles(ambient, tiling, A, B, graph)
    n_used = tiling.n
    bound = 2 * (dsz + (n_used + 1) ** d)
    report.update(attempts=attempts, whole_ambient_tile=fallback, n_used=n_used,
                  tiles=len(tiling.cubes), K=graph.K, tile_flow=graph.to_dict(),
                  transfers=len(resolved.transfers), movement_bound=bound)
    pa = PieceAssignment.from_pairs(ambient, resolved.pairs, A, B, bound)
    verdict = verify_decomposition(pa)
    if not verdict.ok:
        raise InvariantError(f"pipeline output fails verification: {verdict.message} "
                             f"at {verdict.point}")
    report.update(piece_count=len(pa), max_movement=verdict.max_movement)
    return DecomposeResult(True, pa, report=report)
