"""Antisymmetric edge functions with exact rational values.

Values are stored as integer numerators over one common denominator, so
integrality tests are exact and adding fractional parts never loses
precision.  Only positively oriented grid edges ``(base, axis)`` are
stored; the reverse edge carries the negated value.
"""
from __future__ import annotations

import hashlib
import json
import math
from fractions import Fraction
from typing import Iterable

from .lattice import AmbientGrid, Edge


def _to_fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, float):
        return Fraction(v).limit_denominator(10 ** 9)
    return Fraction(int(v))


class FlowMap:
    def __init__(self, ambient: AmbientGrid, denom: int = 1):
        if denom < 1:
            raise ValueError("denominator must be positive")
        self.ambient = ambient
        self.denom = int(denom)
        self.num: dict = {}

    # -- construction ------------------------------------------------------
    @classmethod
    def from_values(cls, ambient: AmbientGrid, values: dict) -> "FlowMap":
        fracs = {e: _to_fraction(v) for e, v in values.items()}
        q = 1
        for v in fracs.values():
            q = math.lcm(q, v.denominator)
        flow = cls(ambient, q)
        for e, v in fracs.items():
            n = v.numerator * (q // v.denominator)
            if n:
                flow.num[_norm_edge(e)] = n
        return flow

    def copy(self) -> "FlowMap":
        out = FlowMap(self.ambient, self.denom)
        out.num = dict(self.num)
        return out

    def rescale(self, denom: int) -> None:
        """Switch to a denominator that is a multiple of the current one."""
        if denom % self.denom:
            raise ValueError("new denominator must be a multiple of the old one")
        m = denom // self.denom
        if m != 1:
            self.num = {e: v * m for e, v in self.num.items()}
            self.denom = denom

    def _align(self, other: "FlowMap") -> None:
        q = math.lcm(self.denom, other.denom)
        self.rescale(q)
        other.rescale(q)

    # -- access ------------------------------------------------------------
    def get_num(self, e: Edge) -> int:
        return self.num.get(e, 0)

    def add_num(self, e: Edge, n: int) -> None:
        if n:
            v = self.num.get(e, 0) + n
            if v:
                self.num[e] = v
            else:
                self.num.pop(e, None)

    def set_num(self, e: Edge, n: int) -> None:
        if n:
            self.num[e] = n
        else:
            self.num.pop(e, None)

    def __getitem__(self, e: Edge) -> Fraction:
        return Fraction(self.num.get(e, 0), self.denom)

    def add(self, e: Edge, value) -> None:
        v = _to_fraction(value)
        if v.denominator != 1 and self.denom % v.denominator:
            self.rescale(math.lcm(self.denom, v.denominator))
        self.add_num(e, v.numerator * (self.denom // v.denominator))

    def edges(self) -> list:
        return sorted(self.num)

    def items(self):
        for e in sorted(self.num):
            yield e, Fraction(self.num[e], self.denom)

    # -- arithmetic ----------------------------------------------------------
    def __add__(self, other: "FlowMap") -> "FlowMap":
        a, b = self.copy(), other.copy()
        a._align(b)
        for e, v in b.num.items():
            a.add_num(e, v)
        return a

    def __neg__(self) -> "FlowMap":
        out = self.copy()
        out.num = {e: -v for e, v in out.num.items()}
        return out

    def __sub__(self, other: "FlowMap") -> "FlowMap":
        return self + (-other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FlowMap):
            return NotImplemented
        return self.ambient == other.ambient and dict(self.items()) == dict(other.items())

    # -- predicates and norms ---------------------------------------------------
    def is_integer(self, e: Edge) -> bool:
        return self.num.get(e, 0) % self.denom == 0

    def fractional_edges(self, among: Iterable[Edge] | None = None) -> list:
        if among is None:
            return sorted(e for e, v in self.num.items() if v % self.denom)
        return sorted(e for e in among if self.num.get(e, 0) % self.denom)

    def all_integer(self) -> bool:
        return all(v % self.denom == 0 for v in self.num.values())

    def sup_norm(self) -> Fraction:
        return Fraction(max((abs(v) for v in self.num.values()), default=0), self.denom)

    def support(self) -> set:
        return set(self.num)

    def floor(self) -> "FlowMap":
        out = FlowMap(self.ambient, 1)
        for e, v in self.num.items():
            if v // self.denom:
                out.num[e] = v // self.denom
        return out

    def normalized(self) -> "FlowMap":
        """Same values over the smallest common denominator."""
        g = self.denom
        for v in self.num.values():
            g = math.gcd(g, v)
            if g == 1:
                break
        out = FlowMap(self.ambient, self.denom // g)
        out.num = {e: v // g for e, v in self.num.items()}
        return out

    # -- divergence ----------------------------------------------------------
    def divergence_num(self) -> dict:
        """Outflow numerators per point (points with zero outflow omitted)."""
        div: dict = {}
        for (p, axis), v in self.num.items():
            q = self.ambient.shift(p, axis, 1)
            div[p] = div.get(p, 0) + v
            div[q] = div.get(q, 0) - v
        return {p: v for p, v in div.items() if v}

    def divergence(self) -> dict:
        return {p: Fraction(v, self.denom) for p, v in self.divergence_num().items()}

    def divergence_mismatch(self, f: dict, points: Iterable | None = None) -> list:
        """Points where the outflow differs from f (f maps points to numbers)."""
        div = self.divergence()
        if points is None:
            points = set(div) | {p for p, v in f.items() if v}
        return sorted(p for p in points if div.get(p, 0) != f.get(p, 0))

    # -- serialization -----------------------------------------------------------
    def to_dict(self, f_hash: str | None = None) -> dict:
        return {
            "ambient": self.ambient.to_dict(),
            "f_hash": f_hash,
            "bound": _frac_str(self.sup_norm()),
            "edges": [{"base": list(p), "axis": a, "value": _frac_str(v)}
                      for (p, a), v in self.items()],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FlowMap":
        amb = AmbientGrid.from_dict(data["ambient"])
        vals = {}
        for row in data["edges"]:
            e = (tuple(row["base"]), int(row["axis"]))
            if not amb.contains(e[0]) or not (0 <= e[1] < amb.d) or not amb.has_edge(*e):
                raise ValueError(f"edge {row} is not an edge of the ambient")
            vals[e] = Fraction(str(row["value"]))
        return cls.from_values(amb, vals)


def _norm_edge(e) -> Edge:
    p, a = e
    return (tuple(p), int(a))


def _frac_str(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def function_hash(values: dict) -> str:
    """Stable short hash of a point -> integer map."""
    rows = sorted((list(p), int(v)) for p, v in values.items() if v)
    return hashlib.sha256(json.dumps(rows).encode()).hexdigest()[:16]
