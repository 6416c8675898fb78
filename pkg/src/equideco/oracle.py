"""Brute-force referees: a plain augmenting-path max-flow, bipartite matching,
and exhaustive subset enumeration.

Nothing here is shared with the production paths in ``conditions`` or
``real_flow``; the point is to have an independent second opinion on small
instances.  Speed is not a goal.
"""
from __future__ import annotations

import math
from collections import deque
from itertools import combinations
from typing import Iterable

from .lattice import AmbientGrid


class CapGraph:
    """Directed graph with integer capacities and paired residual arcs."""

    def __init__(self, n: int):
        self.n = n
        self.head: list[int] = []
        self.cap: list[int] = []
        self.adj: list[list[int]] = [[] for _ in range(n)]

    def add_arc(self, u: int, v: int, c: int) -> int:
        if c < 0:
            raise ValueError("capacities must be >= 0")
        a = len(self.head)
        self.head += [v, u]
        self.cap += [c, 0]
        self.adj[u].append(a)
        self.adj[v].append(a + 1)
        return a

    def max_flow(self, s: int, t: int) -> int:
        """Edmonds-Karp: shortest augmenting paths, arcs scanned in insertion order."""
        total = 0
        while True:
            parent = [-1] * self.n
            parent[s] = -2
            queue = deque([s])
            while queue and parent[t] == -1:
                u = queue.popleft()
                for a in self.adj[u]:
                    v = self.head[a]
                    if parent[v] == -1 and self.cap[a] > 0:
                        parent[v] = a
                        queue.append(v)
            if parent[t] == -1:
                return total
            push = math.inf
            v = t
            while v != s:
                a = parent[v]
                push = min(push, self.cap[a])
                v = self.head[a ^ 1]
            v = t
            while v != s:
                a = parent[v]
                self.cap[a] -= push
                self.cap[a ^ 1] += push
                v = self.head[a ^ 1]
            total += push

    def reachable(self, s: int) -> set:
        """Vertices reachable from s in the residual graph (source side of a min cut)."""
        seen = {s}
        stack = [s]
        while stack:
            u = stack.pop()
            for a in self.adj[u]:
                v = self.head[a]
                if self.cap[a] > 0 and v not in seen:
                    seen.add(v)
                    stack.append(v)
        return seen


def max_bipartite_matching(left: list, adjacency: dict) -> dict:
    """Kuhn's augmenting-path matching, greedy start; returns left -> right."""
    match_r: dict = {}
    match_l: dict = {}
    for u in left:
        for v in adjacency.get(u, ()):
            if v not in match_r:
                match_r[v] = u
                match_l[u] = v
                break
    for u in left:
        if u in match_l:
            continue
        visited = set()
        stack = [(u, iter(adjacency.get(u, ())))]
        via: list = []
        while stack:
            x, it = stack[-1]
            for v in it:
                if v in visited:
                    continue
                visited.add(v)
                if v not in match_r:
                    for (xx, _), vv in zip(stack, via + [v]):
                        match_r[vv] = xx
                        match_l[xx] = vv
                    stack = []
                    break
                via.append(v)
                stack.append((match_r[v], iter(adjacency.get(match_r[v], ()))))
                break
            else:
                stack.pop()
                if via:
                    via.pop()
    return match_l


def _neighbors_within(ambient: AmbientGrid, sources: list, targets: list, radius: int) -> dict:
    return {a: [b for b in targets if ambient.distance(a, b) <= radius] for a in sources}


def saturating_matching_exists(ambient: AmbientGrid, A: Iterable, B: Iterable, k: int) -> bool:
    A = sorted(set(A))
    B = sorted(set(B))
    if len(A) > len(B):
        return False
    m = max_bipartite_matching(A, _neighbors_within(ambient, A, B, k))
    return len(m) == len(A)


def hall_feasible_oracle(ambient: AmbientGrid, A: Iterable, B: Iterable, k: int) -> bool:
    """A matches into B within distance k, and B into A."""
    A = set(A)
    B = set(B)
    return (saturating_matching_exists(ambient, A, B, k)
            and saturating_matching_exists(ambient, B, A, k))


def equidecomposable_oracle(ambient: AmbientGrid, A: Iterable, B: Iterable, budget: int) -> bool:
    """Perfect matching A <-> B using moves of word length <= budget."""
    A = set(A)
    B = set(B)
    if len(A) != len(B):
        return False
    return saturating_matching_exists(ambient, A, B, budget)


def flow_feasibility_oracle(ambient: AmbientGrid, f: dict, M) -> bool:
    """Is there an f-flow on the grid edges with |phi| <= M?

    f maps grid points to integers (missing points are 0).  By integrality
    a real flow within M exists iff an integer one within floor(M) does.
    """
    if sum(f.values()) != 0:
        return False
    cap = math.floor(M)
    if cap < 0:
        return False
    pts = list(ambient.points())
    idx = {p: i for i, p in enumerate(pts)}
    s, t = len(pts), len(pts) + 1
    g = CapGraph(len(pts) + 2)
    supply = 0
    for p in pts:
        v = f.get(p, 0)
        if v > 0:
            g.add_arc(s, idx[p], v)
            supply += v
        elif v < 0:
            g.add_arc(idx[p], t, -v)
    if supply == 0:
        return True
    for e in ambient.all_edges():
        u, axis = e
        v = ambient.edge_head(e)
        g.add_arc(idx[u], idx[v], cap)
        g.add_arc(idx[v], idx[u], cap)
    return g.max_flow(s, t) == supply


def hall_bruteforce(ambient: AmbientGrid, f: dict, k: int) -> bool:
    """k-Hall for an integer function by enumerating every subset of its support.

    Zero- and opposite-sign sites only enlarge the ball on the right-hand
    side, so subsets of {f > 0} (resp. {f < 0}) are enough.
    """
    for sign in (1, -1):
        pos = sorted(p for p, v in f.items() if sign * v > 0)
        near = {p: set(ambient.ball_points(p, k)) for p in pos}
        for r in range(1, len(pos) + 1):
            for F in combinations(pos, r):
                lhs = sum(sign * f[p] for p in F)
                reach = set().union(*(near[p] for p in F))
                rhs = sum(-sign * f.get(q, 0) for q in reach if sign * f.get(q, 0) < 0)
                if lhs > rhs:
                    return False
    return True
