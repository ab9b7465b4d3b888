"""Interaction graphs, elimination orderings, and bucket trees.

A bucket tree has one vertex per eliminated variable. Vertex k is labeled
chi(k) = {v_k} plus v_k's later neighbors in the induced graph, carries the
factors whose earliest scope variable is v_k, and points at the bucket of
the earliest variable in chi(k) - {v_k}. Buckets with nothing left to
connect to (last bucket of a component) chain to the next bucket in the
ordering over an empty separator, so the result is always a single tree
even when the interaction graph is disconnected; the scalar messages that
cross those empty separators carry each component's contribution.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .model import Evidence, Network


class UndirectedGraph:
    def __init__(self, vertices: Iterable[int] = ()):
        self.adj: dict[int, set[int]] = {v: set() for v in vertices}

    @property
    def vertices(self) -> list[int]:
        return sorted(self.adj)

    def add_vertex(self, v: int) -> None:
        self.adj.setdefault(v, set())

    def add_edge(self, u: int, v: int) -> None:
        if u == v:
            return
        self.add_vertex(u)
        self.add_vertex(v)
        self.adj[u].add(v)
        self.adj[v].add(u)

    def add_clique(self, vs: Iterable[int]) -> None:
        vs = list(vs)
        for v in vs:
            self.add_vertex(v)
        for i, u in enumerate(vs):
            for v in vs[i + 1 :]:
                self.add_edge(u, v)

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adj.get(u, ())

    def neighbors(self, v: int) -> set[int]:
        return self.adj[v]

    def edge_count(self) -> int:
        return sum(len(nb) for nb in self.adj.values()) // 2


def scope_graph(vertices: Iterable[int], scopes: Iterable[Sequence[int]]) -> UndirectedGraph:
    """Graph over the given vertices with a clique per scope (restricted to
    the vertex set)."""
    g = UndirectedGraph(vertices)
    keep = set(g.adj)
    for s in scopes:
        g.add_clique([v for v in s if v in keep])
    return g


def moralize(net: Network) -> UndirectedGraph:
    """Undirected DAG edges plus marriages between co-parents; equivalently
    a clique over every family."""
    return scope_graph(range(net.n), [f.scope for f in net.factors()])


@dataclass(frozen=True)
class Ordering:
    order: tuple[int, ...]
    induced_width: int

    def position(self) -> dict[int, int]:
        return {v: k for k, v in enumerate(self.order)}


def min_fill_ordering(g: UndirectedGraph, seed: int = 0) -> Ordering:
    """Greedy min-fill elimination ordering with seeded uniform tie-breaks.

    induced_width is the width this ordering achieves on g.
    """
    rng = np.random.default_rng(seed)
    adj = {v: set(nb) for v, nb in g.adj.items()}
    order: list[int] = []
    width = 0
    while adj:
        best_cost = None
        ties: list[int] = []
        for v in sorted(adj):
            nbs = adj[v]
            cost = 0
            nb_list = list(nbs)
            for i, a in enumerate(nb_list):
                cost += sum(1 for b in nb_list[i + 1 :] if b not in adj[a])
            if best_cost is None or cost < best_cost:
                best_cost = cost
                ties = [v]
            elif cost == best_cost:
                ties.append(v)
        v = ties[int(rng.integers(len(ties)))] if len(ties) > 1 else ties[0]
        nbs = adj.pop(v)
        width = max(width, len(nbs))
        for a in nbs:
            adj[a].discard(v)
        nb_list = list(nbs)
        for i, a in enumerate(nb_list):
            for b in nb_list[i + 1 :]:
                adj[a].add(b)
                adj[b].add(a)
        order.append(v)
    return Ordering(tuple(order), width)


def free_ordering(net: Network, evidence: Evidence | None = None, seed: int = 0) -> Ordering:
    """Min-fill ordering of the non-evidence variables over the moral graph
    of the evidence-conditioned problem."""
    evidence = evidence or {}
    scopes = [tuple(v for v in f.scope if v not in evidence) for f in net.factors()]
    keep = (v for v in range(net.n) if v not in evidence)
    return min_fill_ordering(scope_graph(keep, scopes), seed)


@dataclass
class TreeDecomposition:
    """Labeled tree over cluster vertices 0..m-1.

    chi[k] is the variable label, psi[k] the indices of factors placed at
    vertex k (indices into whatever factor list the tree was built from).
    For bucket trees vertex k belongs to elimination position k and
    bucket_var[k] is that variable.
    """

    chi: list[frozenset[int]]
    psi: list[list[int]]
    edges: list[tuple[int, int]]
    bucket_var: tuple[int, ...] = ()
    parent: list[int | None] = field(default_factory=list)
    children: list[list[int]] = field(default_factory=list)

    def __post_init__(self):
        m = len(self.chi)
        if not self.parent:
            self.parent = [None] * m
            for u, v in self.edges:
                # bucket trees orient edges child -> parent with u < v
                self.parent[u] = v
        self.children = [[] for _ in range(m)]
        for k, p in enumerate(self.parent):
            if p is not None:
                self.children[p].append(k)

    @property
    def m(self) -> int:
        return len(self.chi)

    def vertex_of(self, var: int) -> int:
        return self.bucket_var.index(var)

    def sep(self, u: int, v: int) -> frozenset[int]:
        return self.chi[u] & self.chi[v]

    def elim(self, u: int, v: int) -> frozenset[int]:
        return self.chi[u] - self.chi[v]

    def tree_width(self) -> int:
        return max((len(c) for c in self.chi), default=1) - 1

    def validate(self, scopes: Sequence[Sequence[int]]) -> None:
        """Check the decomposition laws; raises AssertionError on violation."""
        m = self.m
        placed = [0] * len(scopes)
        for k in range(m):
            for i in self.psi[k]:
                placed[i] += 1
                assert set(scopes[i]) <= self.chi[k], (i, k)
        assert all(c == 1 for c in placed), "factor not placed exactly once"
        if m == 0:
            return
        assert len(self.edges) == m - 1, "not a tree"
        adj = [[] for _ in range(m)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        assert len(seen) == m, "tree is disconnected"
        all_vars = set().union(*self.chi) if self.chi else set()
        for x in all_vars:
            holding = [k for k in range(m) if x in self.chi[k]]
            sub = set(holding)
            comp = {holding[0]}
            stack = [holding[0]]
            while stack:
                u = stack.pop()
                for w in adj[u]:
                    if w in sub and w not in comp:
                        comp.add(w)
                        stack.append(w)
            assert comp == sub, f"variable {x} induces a disconnected subtree"


def build_bucket_tree(
    net: Network, ordering: Ordering, evidence: Evidence | None = None
) -> TreeDecomposition:
    """Bucket tree along an elimination ordering of the free variables.

    With evidence, factor scopes are taken post-conditioning and the
    ordering must cover exactly the non-evidence variables. psi indices
    refer to net.factors() order (CPTs first, then unary attachments);
    factors fully fixed by evidence land in the root bucket as scalars.
    """
    evidence = evidence or {}
    order = ordering.order
    free = set(order)
    expected = set(range(net.n)) - set(evidence)
    if free != expected:
        raise ValueError("ordering must cover exactly the non-evidence variables")
    scopes = [tuple(v for v in f.scope if v not in evidence) for f in net.factors()]
    m = len(order)
    if m == 0:
        return TreeDecomposition([], [[] for _ in range(0)], [], ())
    pos = {v: k for k, v in enumerate(order)}
    adj: dict[int, set[int]] = {v: set() for v in order}
    for s in scopes:
        for i, a in enumerate(s):
            for b in s[i + 1 :]:
                adj[a].add(b)
                adj[b].add(a)
    chi: list[frozenset[int]] = []
    parent: list[int | None] = [None] * m
    for k, v in enumerate(order):
        later = {u for u in adj[v] if pos[u] > k}
        chi.append(frozenset({v} | later))
        if later:
            parent[k] = pos[min(later, key=lambda u: pos[u])]
        elif k + 1 < m:
            parent[k] = k + 1
        lst = list(later)
        for i, a in enumerate(lst):
            for b in lst[i + 1 :]:
                adj[a].add(b)
                adj[b].add(a)
        for a in later:
            adj[a].discard(v)
    psi: list[list[int]] = [[] for _ in range(m)]
    for i, s in enumerate(scopes):
        if s:
            psi[min(pos[v] for v in s)].append(i)
        else:
            psi[m - 1].append(i)
    edges = [(k, p) for k, p in enumerate(parent) if p is not None]
    return TreeDecomposition(chi, psi, edges, tuple(order), parent=parent)
