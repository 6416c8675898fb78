"""Command-line interface.

Exit codes: 0 success or satisfied, 1 negative verdict, 2 input error,
3 internal invariant violation.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import io as eio
from .conditions import SiteFunction, check_k_hall, check_k_hall_sets, equidistribution_report
from .equidecomp import PieceAssignment, decompose, verify_decomposition
from .flows import FlowMap, function_hash
from .lattice import AmbientError, AmbientGrid, make_ambient
from .oracle import equidecomposable_oracle, flow_feasibility_oracle, hall_feasible_oracle
from .real_flow import InvariantError, build_real_flow
from .render import flow_layer, pieces_layer, render_svg, set_layer, tiling_layer
from .rounding import RoundingTrace, make_integer_flow
from .tiling import CubeTiling, cubic_schedule, nested_family, tile_cubes

OK, NEGATIVE, INPUT_ERROR, INVARIANT = 0, 1, 2, 3


def parse_ambient(text: str) -> AmbientGrid:
    """'torus:12x12', 'window:64x64:2x3' (finite factor last) or 'torus::6'."""
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise ValueError(f"bad ambient {text!r}; expected kind:SIDES[:ORDERS]")

    def nums(s):
        return [int(x) for x in s.split("x")] if s else []

    return make_ambient(parts[0], nums(parts[1]), nums(parts[2]) if len(parts) == 3 else [])


def parse_schedule(text: str | None):
    if text is None or text == "cubic":
        return cubic_schedule
    kind, _, val = text.partition(":")
    if kind == "const":
        s = int(val)
        return lambda n: s
    if kind == "table":
        table = {int(a): int(b) for a, b in (kv.split("=") for kv in val.split(","))}
        return lambda n: table[n]
    raise ValueError(f"unknown schedule {text!r}; use cubic, const:S or table:n=s,...")


class Output:
    def __init__(self, args):
        self.fmt = args.format
        self.dir = Path(args.out) if args.out else None
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path | None:
        return self.dir / name if self.dir is not None else None

    def emit(self, name: str, doc: dict, table: tuple | None = None, summary: str = "") -> None:
        """Write name.json (+ name.csv) under --out, or print to stdout."""
        if self.dir is not None:
            eio.write_json(self.dir / f"{name}.json", doc)
            if table is not None:
                eio.write_csv(self.dir / f"{name}.csv", *table)
            if summary:
                print(summary)
            return
        if self.fmt == "json" or table is None:
            sys.stdout.write(eio.dumps(doc))
        else:
            sys.stdout.write(eio.csv_text(*table))


def _sets(args, need_b: bool = True):
    amb, A = eio.read_pointset(args.a)
    B = []
    if need_b:
        _, B = eio.read_pointset(args.b, amb)
    return amb, A, B


def _function(args) -> SiteFunction:
    if getattr(args, "function", None):
        return eio.parse_site_function(eio.read_json(args.function))
    amb, A, B = _sets(args)
    return SiteFunction.from_sets(amb, A, B)


# -- subcommands ----------------------------------------------------------------------

def cmd_check_hall(args, out: Output) -> int:
    if args.function:
        f = _function(args)
        v = check_k_hall(f, args.k)
        fh = function_hash(f.values)
    else:
        # sets may overlap; a shared point may pair with itself
        amb, A, B = _sets(args)
        v = check_k_hall_sets(amb, A, B, args.k)
        fh = function_hash(SiteFunction.from_sets(amb, A, B).values)
    out.emit("hall", {"kind": "hall", "f_hash": fh, **v.to_dict()},
             (["k", "satisfied", "failed_inequality", "witness_size", "lhs", "rhs"],
              [[v.k, v.satisfied, v.side, len(v.witness), v.lhs, v.rhs]]),
             f"k={v.k} satisfied={v.satisfied}")
    return OK if v.satisfied else NEGATIVE


def cmd_discrepancy(args, out: Output) -> int:
    amb, A = eio.read_pointset(args.a)
    rep = equidistribution_report(amb, A, args.n_max, args.n_min)
    rows = [[n, f"{w:.6g}", s] for n, w, s in zip(rep.n_values, rep.worst, rep.skipped)]
    out.emit("discrepancy", {"kind": "discrepancy", **rep.to_dict()},
             (["n", "worst_discrepancy", "skipped_base_points"], rows),
             f"fitted c = {rep.fitted_c:.6g}")
    if out.dir is not None:
        from .figures import discrepancy_figure
        discrepancy_figure(rep, out.path("discrepancy.png"))
    return OK


def cmd_tilings(args, out: Output) -> int:
    amb = parse_ambient(args.ambient)
    if args.tile_size is not None:
        tiling = tile_cubes(amb, args.tile_size)
        rows = [[i, list(c.corner), list(c.side_lengths)] for i, c in enumerate(tiling.cubes)]
        out.emit("tiling", {"kind": "tiling", **tiling.to_dict()},
                 (["cube", "corner", "sides"], rows), f"{len(tiling.cubes)} cubes")
        if out.dir is not None and amb.d == 2:
            out.path("tiling.svg").write_text(render_svg([tiling_layer(tiling.cubes)], amb))
        return OK
    fam = nested_family(amb, args.n0, args.stages, parse_schedule(args.schedule),
                        seed=args.seed, persistence=args.persistence)
    rows = [[n, s, len(st)] for n, s, st in zip(
        fam.stage_params, fam.sides, fam.stages)]
    out.emit("family", {"kind": "family", **fam.to_dict()},
             (["stage_param", "side", "cubes"], rows),
             f"coverage {fam.coverage:.6g}, bound {fam.bound:.6g}")
    if out.dir is not None:
        from .figures import coverage_figure
        coverage_figure(fam, out.path("family.png"))
        if amb.d == 2:
            layers = [tiling_layer(st, f"stage {i}") for i, st in enumerate(fam.stages)]
            out.path("family.svg").write_text(render_svg(layers, amb, cell=2))
    return OK


def cmd_real_flow(args, out: Output) -> int:
    f = _function(args)
    v = check_k_hall(f, args.k)
    if not v.satisfied:
        out.emit("hall", {"kind": "hall", **v.to_dict()}, summary="k-Hall condition fails")
        return NEGATIVE
    flow, rep = build_real_flow(f, args.k, args.delta)
    doc = {"kind": "flow", **flow.to_dict(function_hash(f.values)), "report": rep.to_dict()}
    rows = [[list(p), a, str(val)] for (p, a), val in flow.items()]
    out.emit("flow", doc, (["base", "axis", "value"], rows),
             f"sup norm {rep.sup_norm}, residual {rep.residual_fraction:.4g}")
    if out.dir is not None and f.ambient.d == 2:
        from .figures import flow_figure
        flow_figure(flow, out.path("flow.png"))
        out.path("flow.svg").write_text(render_svg([flow_layer(flow)], f.ambient))
    return OK


def cmd_round_flow(args, out: Output) -> int:
    doc = eio.read_json(args.flow)
    phi = FlowMap.from_dict(doc)
    if args.function or args.a:
        f = _function(args)
        fvals = f.values
    else:
        fvals = {p: int(v) for p, v in phi.divergence().items()}
        if any(v != int(v) for v in phi.divergence().values()):
            raise ValueError("flow divergence is not integer; pass --function")
    family = None
    if args.n0 is not None and phi.ambient.d >= 2:
        family = nested_family(phi.ambient, args.n0, args.stages, parse_schedule(args.schedule),
                               seed=args.seed)
    trace = RoundingTrace()
    psi = make_integer_flow(phi, fvals, family, trace)
    out_doc = {"kind": "flow", **psi.to_dict(doc.get("f_hash")), "trace": trace.to_dict()}
    rows = [[list(p), a, str(val)] for (p, a), val in psi.items()]
    out.emit("integer_flow", out_doc, (["base", "axis", "value"], rows),
             f"max change {trace.max_change}, stages {len(trace.stages)}")
    return OK


def _pieces_table(pa: PieceAssignment) -> tuple:
    rows = [[i, " ".join(map(str, g.translation)), " ".join(map(str, g.delta)),
             g.word_length(pa.ambient), len(pts)] for i, (g, pts) in enumerate(pa.pieces)]
    return ["piece", "translation", "delta", "word_length", "size"], rows


def _write_piece_art(out: Output, amb: AmbientGrid, A, B, pa: PieceAssignment | None) -> None:
    if out.dir is None or amb.d != 2:
        return
    from .figures import pieces_figure, sets_figure
    out.path("sets.svg").write_text(render_svg(
        [set_layer(A, "A", "#1f77b4"), set_layer(B, "B", "#ff7f0e")], amb))
    sets_figure(amb, A, B, out.path("sets.png"))
    if pa is not None:
        out.path("pieces.svg").write_text(render_svg([pieces_layer(pa)], amb))
        pieces_figure(pa, out.path("pieces.png"))


def cmd_decompose(args, out: Output) -> int:
    amb, A, B = _sets(args)
    res = decompose(amb, A, B, args.k, c=args.c, adapt_k=args.adapt_k,
                    tile_size=args.tile_size, check_lower_bound=not args.no_lower_bound)
    if res.success:
        out.emit("pieces", {"kind": "pieces", **res.pieces.to_dict()}, _pieces_table(res.pieces),
                 f"{len(res.pieces)} pieces, max movement {res.report['max_movement']}")
    if out.dir is not None or not res.success:
        rep = {"kind": "decompose_report", **{k: v for k, v in res.to_dict().items()
                                              if k != "pieces"}}
        if out.dir is not None:
            eio.write_json(out.path("report.json"), rep)
        else:
            sys.stdout.write(eio.dumps(rep))
    _write_piece_art(out, amb, A, B, res.pieces)
    if not res.success:
        print(f"failed at stage {res.stage}: {res.message}", file=sys.stderr)
    return OK if res.success else NEGATIVE


def cmd_verify(args, out: Output) -> int:
    pa = PieceAssignment.from_dict(eio.read_json(args.pieces))
    A = B = None
    if args.a:
        _, A = eio.read_pointset(args.a, pa.ambient)
    if args.b:
        _, B = eio.read_pointset(args.b, pa.ambient)
    v = verify_decomposition(pa, A, B, args.bound)
    out.emit("verify", {"kind": "verify", **v.to_dict()},
             (["ok", "violation", "point", "max_movement"],
              [[v.ok, v.message, list(v.point) if v.point else "", v.max_movement]]),
             "ok" if v.ok else f"violation: {v.message} at {v.point}")
    return OK if v.ok else NEGATIVE


def cmd_oracle(args, out: Output) -> int:
    if args.question == "hall":
        amb, A, B = _sets(args)
        ans = hall_feasible_oracle(amb, A, B, args.k)
        doc = {"question": "hall", "k": args.k, "answer": ans}
    elif args.question == "equidecomposable":
        amb, A, B = _sets(args)
        ans = equidecomposable_oracle(amb, A, B, args.budget)
        doc = {"question": "equidecomposable", "budget": args.budget, "answer": ans}
    else:
        f = _function(args)
        ans = flow_feasibility_oracle(f.ambient, f.values, args.M)
        doc = {"question": "flow", "M": args.M, "answer": ans}
    out.emit("oracle", {"kind": "oracle", **doc},
             (list(doc), [list(doc.values())]), f"{args.question}: {ans}")
    return OK if ans else NEGATIVE


def cmd_demo(args, out: Output) -> int:
    from .demo import demo_circle_square
    d = demo_circle_square(args.size, args.k, args.seed, args.area,
                           balance=not args.no_balance, adapt_k=args.adapt_k)
    res = d.result
    rep = {"kind": "demo_report", "size": args.size, "area": args.area,
           "A_count": len(d.A), "B_count": len(d.B), "dropped": [list(p) for p in d.dropped],
           "discrepancy": d.discrepancy,
           **{k: v for k, v in res.to_dict().items() if k != "pieces"}}
    if out.dir is not None:
        eio.write_json(out.path("report.json"), rep)
        if res.success:
            eio.write_json(out.path("pieces.json"), {"kind": "pieces", **res.pieces.to_dict()})
            eio.write_csv(out.path("pieces.csv"), *_pieces_table(res.pieces))
        if d.discrepancy:
            rows = []
            for name, r in d.discrepancy.items():
                rows += [[name, n, f"{w:.6g}"] for n, w in zip(r["n_values"], r["worst_discrepancy"])]
            eio.write_csv(out.path("discrepancy.csv"), ["set", "n", "worst_discrepancy"], rows)
            from .conditions import DiscrepancyReport
            from .figures import discrepancy_figure
            r = d.discrepancy["A"]
            discrepancy_figure(DiscrepancyReport(r["n_values"], r["worst_discrepancy"],
                                                 r["fitted_c"], r["skipped_base_points"]),
                               out.path("discrepancy.png"), "disk")
        _write_piece_art(out, d.ambient, d.A, d.B, res.pieces)
    else:
        sys.stdout.write(eio.dumps(rep if args.format == "json" or not res.success
                                   else {**rep, "pieces": res.pieces.to_dict()}))
    if res.success:
        print(f"decomposed: {len(res.pieces)} pieces, k={res.report.get('k_hall')}",
              file=sys.stderr)
        return OK
    print(f"no decomposition: stage {res.stage}: {res.message}", file=sys.stderr)
    return NEGATIVE


def cmd_render(args, out: Output) -> int:
    layers = []
    amb = parse_ambient(args.ambient) if args.ambient else None
    for path, color in ((args.a, "#1f77b4"), (args.b, "#ff7f0e")):
        if path:
            amb, S = eio.read_pointset(path, amb)
            layers.append(set_layer(S, Path(path).stem, color))
    if args.tiling:
        t = CubeTiling.from_dict(eio.read_json(args.tiling))
        amb = amb or t.ambient
        layers.append(tiling_layer(t.cubes))
    if args.flow:
        fl = FlowMap.from_dict(eio.read_json(args.flow))
        amb = amb or fl.ambient
        layers.append(flow_layer(fl))
    if args.pieces:
        pa = PieceAssignment.from_dict(eio.read_json(args.pieces))
        amb = amb or pa.ambient
        layers.append(pieces_layer(pa))
    svg = render_svg(layers, amb, cell=args.cell)
    if out.dir is not None:
        out.path("render.svg").write_text(svg)
        print(str(out.path("render.svg")))
    else:
        sys.stdout.write(svg)
    return OK


# -- parser ------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--format", choices=["text", "json"], default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")

    p = argparse.ArgumentParser(prog="equideco", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("--out", default=None, help="output directory")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=func)
        return sp

    def sets(sp, b=True):
        sp.add_argument("--a", "--input", dest="a", help="point-set JSON for A")
        if b:
            sp.add_argument("--b", "--input2", dest="b", help="point-set JSON for B")

    sp = add("check-hall", cmd_check_hall, "decide the k-Hall condition")
    sets(sp)
    sp.add_argument("--function", help="site-function JSON instead of --a/--b")
    sp.add_argument("--k", type=int, required=True)

    sp = add("discrepancy", cmd_discrepancy, "equidistribution scan of a set")
    sets(sp, b=False)
    sp.add_argument("--n-max", type=int, required=True)
    sp.add_argument("--n-min", type=int, default=1)

    sp = add("tilings", cmd_tilings, "cube tilings and nested families")
    sp.add_argument("--ambient", required=True, help="e.g. torus:1728 or torus:48x48")
    sp.add_argument("--tile-size", type=int)
    sp.add_argument("--n0", type=int, default=2)
    sp.add_argument("--stages", type=int, default=3)
    sp.add_argument("--schedule", default="cubic", help="cubic, const:S or table:n=s,...")
    sp.add_argument("--persistence", type=int, default=1)

    sp = add("real-flow", cmd_real_flow, "bounded real flow from tile matchings")
    sets(sp)
    sp.add_argument("--function")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--delta", type=float)

    sp = add("round-flow", cmd_round_flow, "round a flow to an integer flow")
    sp.add_argument("--flow", required=True)
    sets(sp)
    sp.add_argument("--function")
    sp.add_argument("--n0", type=int)
    sp.add_argument("--stages", type=int, default=2)
    sp.add_argument("--schedule", default="cubic")

    sp = add("decompose", cmd_decompose, "equidecomposition pieces for A and B")
    sets(sp)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--c", type=float)
    sp.add_argument("--adapt-k", action="store_true", help="raise k until the Hall condition holds")
    sp.add_argument("--tile-size", type=int)
    sp.add_argument("--no-lower-bound", action="store_true",
                    help="size reservoirs by the transfers instead of the uniform bound")

    sp = add("verify", cmd_verify, "check a pieces file")
    sp.add_argument("--pieces", required=True)
    sets(sp)
    sp.add_argument("--bound", type=int)

    sp = add("oracle", cmd_oracle, "brute-force reference answers")
    sp.add_argument("question", choices=["hall", "equidecomposable", "flow"])
    sets(sp)
    sp.add_argument("--function")
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--budget", type=int, default=1)
    sp.add_argument("--M", type=float, default=1.0)

    sp = add("demo", cmd_demo, "demonstrations")
    sp.add_argument("name", choices=["circle-square"])
    sp.add_argument("--size", type=int, default=64)
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--area", type=float, default=0.25)
    sp.add_argument("--adapt-k", action="store_true")
    sp.add_argument("--no-balance", action="store_true")

    sp = add("render", cmd_render, "SVG of sets, tilings, flows and pieces")
    sets(sp)
    sp.add_argument("--ambient")
    sp.add_argument("--tiling")
    sp.add_argument("--flow")
    sp.add_argument("--pieces")
    sp.add_argument("--cell", type=int, default=8)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        out = Output(args)
        return args.func(args, out)
    except InvariantError as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return INVARIANT
    except (eio.FormatError, AmbientError, ValueError, KeyError, TypeError, OSError,
            json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
