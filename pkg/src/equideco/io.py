"""JSON and CSV file formats.

Every JSON document carries ``"schema": "equideco/1"``.  Point sets are
stored either as explicit coordinate lists or as a base64 bitmap over the
ambient points in lexicographic order.
"""
from __future__ import annotations

import base64
import csv
import io
import json
from pathlib import Path

import numpy as np

from .conditions import SiteFunction
from .lattice import AmbientGrid

SCHEMA = "equideco/1"


class FormatError(ValueError):
    pass


def dumps(doc: dict) -> str:
    out = {"schema": SCHEMA}
    out.update(doc)
    return json.dumps(out, indent=1, sort_keys=False) + "\n"


def write_json(path, doc: dict) -> None:
    Path(path).write_text(dumps(doc))


def read_json(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("schema") != SCHEMA:
        raise FormatError(f"{path}: missing or unknown schema header (want {SCHEMA!r})")
    return doc


# -- point sets ---------------------------------------------------------------------

def encode_bitmap(ambient: AmbientGrid, points) -> str:
    bits = np.zeros(len(ambient), dtype=np.uint8)
    for p in points:
        bits[ambient.index(p)] = 1
    return base64.b64encode(np.packbits(bits).tobytes()).decode("ascii")


def decode_bitmap(ambient: AmbientGrid, text: str) -> list:
    raw = np.frombuffer(base64.b64decode(text), dtype=np.uint8)
    bits = np.unpackbits(raw)
    if bits.size < len(ambient) or bits[len(ambient):].any():
        raise FormatError("bitmap length does not match the ambient")
    return [ambient.point_at(int(i)) for i in np.flatnonzero(bits[: len(ambient)])]


def pointset_doc(ambient: AmbientGrid, points, bitmap: bool = False) -> dict:
    doc = {"kind": "pointset", "ambient": ambient.to_dict()}
    pts = sorted(set(map(tuple, points)))
    if bitmap:
        doc["bitmap"] = encode_bitmap(ambient, pts)
        doc["count"] = len(pts)
    else:
        doc["points"] = [list(p) for p in pts]
    return doc


def parse_pointset(doc: dict, ambient: AmbientGrid | None = None):
    """(ambient, sorted points) from a point-set document."""
    if "ambient" in doc:
        amb = AmbientGrid.from_dict(doc["ambient"])
        if ambient is not None and amb != ambient:
            raise FormatError("point sets live on different ambients")
    elif ambient is not None:
        amb = ambient
    else:
        raise FormatError("point set has no ambient")
    if "bitmap" in doc:
        pts = decode_bitmap(amb, doc["bitmap"])
    else:
        pts = [tuple(int(c) for c in p) for p in doc.get("points", [])]
    for p in pts:
        if not amb.contains(p):
            raise FormatError(f"point {list(p)} outside the ambient")
    return amb, sorted(set(pts))


def read_pointset(path, ambient: AmbientGrid | None = None):
    return parse_pointset(read_json(path), ambient)


def site_function_doc(f: SiteFunction) -> dict:
    return {"kind": "function", "ambient": f.ambient.to_dict(),
            "values": [{"point": list(p), "value": v} for p, v in sorted(f.values.items())]}


def parse_site_function(doc: dict) -> SiteFunction:
    amb = AmbientGrid.from_dict(doc["ambient"])
    if "values" in doc:
        vals = {tuple(row["point"]): int(row["value"]) for row in doc["values"]}
        return SiteFunction(amb, vals)
    _, A = parse_pointset(doc.get("A", {}), amb)
    _, B = parse_pointset(doc.get("B", {}), amb)
    return SiteFunction.from_sets(amb, A, B)


# -- csv ------------------------------------------------------------------------------

def csv_text(header: list, rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_csv(path, header: list, rows: list) -> None:
    Path(path).write_text(csv_text(header, rows))
