"""Deterministic SVG drawings of planar sets, tilings, flows and pieces."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .lattice import AmbientError, AmbientGrid, TORUS

PALETTE = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#ad494a",
]


@dataclass
class Layer:
    kind: str  # "set" | "tiling" | "flow" | "pieces"
    data: object
    label: str = ""
    style: dict = field(default_factory=dict)


def set_layer(points, label: str = "", color: str = "#1f77b4", opacity: float = 0.6) -> Layer:
    return Layer("set", sorted(set(map(tuple, points))), label,
                 {"color": color, "opacity": opacity})


def tiling_layer(cubes, label: str = "tiles") -> Layer:
    return Layer("tiling", list(cubes), label)


def flow_layer(flow, label: str = "flow") -> Layer:
    return Layer("flow", flow, label)


def pieces_layer(pieces, label: str = "pieces") -> Layer:
    return Layer("pieces", pieces, label)


def _fmt(x) -> str:
    if isinstance(x, Fraction):
        x = float(x)
    if float(x).is_integer():
        return str(int(x))
    return f"{x:.3f}".rstrip("0").rstrip(".")


class _Canvas:
    def __init__(self, ambient: AmbientGrid | None, cell: int):
        self.amb = ambient
        self.cell = cell
        if ambient is None:
            self.w = self.h = 0
        else:
            self.w, self.h = ambient.sides
        self.parts: list = []

    def xy(self, p) -> tuple:
        """Top-left corner of the cell of grid point p (axis 1 drawn upward)."""
        return p[0] * self.cell, (self.h - 1 - p[1]) * self.cell

    def center(self, p) -> tuple:
        x, y = self.xy(p)
        return x + self.cell / 2, y + self.cell / 2


def _arcs(start: int, ext: int, N: int, torus: bool) -> list:
    if torus and start + ext >= N:
        return [(start, N - start), (0, start + ext + 1 - N)]
    return [(start, ext + 1)]


def _draw_set(cv: _Canvas, layer: Layer, idx: int) -> None:
    color = layer.style.get("color", PALETTE[idx % len(PALETTE)])
    op = layer.style.get("opacity", 0.6)
    cv.parts.append(f'<g id="layer{idx}" class="set" fill="{color}" fill-opacity="{op}">'
                    f'<title>{layer.label}</title>')
    for p in sorted({tuple(q[:2]) for q in layer.data}):
        x, y = cv.xy(p)
        cv.parts.append(f'<rect x="{x}" y="{y}" width="{cv.cell}" height="{cv.cell}"/>')
    cv.parts.append("</g>")


def _draw_tiling(cv: _Canvas, layer: Layer, idx: int) -> None:
    torus = cv.amb.kind == TORUS
    cv.parts.append(f'<g id="layer{idx}" class="tiling" fill="none" stroke="#000" '
                    f'stroke-width="1"><title>{layer.label}</title>')
    for cube in layer.data:
        for x0, lx in _arcs(cube.corner[0], cube.extents[0], cv.w, torus):
            for y0, ly in _arcs(cube.corner[1], cube.extents[1], cv.h, torus):
                x, _ = cv.xy((x0, 0))
                _, y = cv.xy((0, y0 + ly - 1))
                cv.parts.append(f'<rect x="{x}" y="{y}" width="{lx * cv.cell}" '
                                f'height="{ly * cv.cell}"/>')
    cv.parts.append("</g>")


def _draw_flow(cv: _Canvas, layer: Layer, idx: int) -> None:
    flow = layer.data
    top = flow.sup_norm()
    cv.parts.append(f'<g id="layer{idx}" class="flow" stroke="#000" '
                    f'marker-end="url(#arrow)"><title>{layer.label}</title>')
    for (p, axis), v in flow.items():
        if v == 0:
            continue
        q = cv.amb.shift(p, axis, 1)
        x1, y1 = cv.center(p)
        x2, y2 = cv.center(q)
        if abs(x2 - x1) > cv.cell or abs(y2 - y1) > cv.cell:
            # wrap-around edge: draw a stub leaving the picture
            x2 = x1 + (cv.cell * 0.5 if axis == 0 else 0)
            y2 = y1 - (cv.cell * 0.5 if axis == 1 else 0)
        if v < 0:
            x1, y1, x2, y2 = x2, y2, x1, y1
        width = 0.5 + 2.5 * float(abs(v) / top)
        cv.parts.append(f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" '
                        f'y2="{_fmt(y2)}" stroke-width="{_fmt(width)}"/>')
    cv.parts.append("</g>")


def _draw_pieces(cv: _Canvas, layer: Layer, idx: int) -> None:
    pa = layer.data
    cv.parts.append(f'<g id="layer{idx}" class="pieces"><title>{layer.label}</title>')
    for i, (g, pts) in enumerate(pa.pieces):
        color = PALETTE[i % len(PALETTE)]
        t = ",".join(str(x) for x in g.translation)
        cv.parts.append(f'<g id="piece{i}" fill="{color}" data-gamma="{t}">')
        for p in sorted({tuple(q[:2]) for q in pts}):
            x, y = cv.xy(p)
            cv.parts.append(f'<rect x="{x}" y="{y}" width="{cv.cell}" height="{cv.cell}"/>')
        cv.parts.append("</g>")
    cv.parts.append("</g>")


_DRAW = {"set": _draw_set, "tiling": _draw_tiling, "flow": _draw_flow, "pieces": _draw_pieces}


def render_svg(layers: list, ambient: AmbientGrid | None = None, cell: int = 8) -> str:
    """SVG document for the layers, drawn in order; axis 1 points up."""
    if ambient is None:
        for layer in layers:
            amb = getattr(layer.data, "ambient", None)
            if amb is not None:
                ambient = amb
                break
    if ambient is None and layers:
        raise ValueError("render_svg needs an ambient for these layers")
    if ambient is not None and ambient.d != 2:
        raise AmbientError(f"only planar ambients can be drawn (d={ambient.d})")
    cv = _Canvas(ambient, cell)
    W, H = cv.w * cell, cv.h * cell
    head = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">',
        '<defs><marker id="arrow" viewBox="0 0 6 6" refX="5" refY="3" markerWidth="4" '
        'markerHeight="4" orient="auto"><path d="M0,0 L6,3 L0,6 z"/></marker></defs>',
    ]
    if W:
        head.append(f'<rect x="0" y="0" width="{W}" height="{H}" fill="#fff"/>')
    for i, layer in enumerate(layers):
        if layer.kind not in _DRAW:
            raise ValueError(f"unknown layer kind {layer.kind!r}")
        _DRAW[layer.kind](cv, layer, i)
    return "\n".join(head + cv.parts + ["</svg>"]) + "\n"
