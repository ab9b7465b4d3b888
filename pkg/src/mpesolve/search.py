"""Depth-first branch and bound guided by mini-bucket upper bounds.

Two solvers share the anytime plumbing. bbmb_solve compiles the bound
tables once and searches in reverse elimination order, so a node costs a
handful of table lookups. bbbt_solve recomputes singleton bounds at every
node by tree propagation on the clamped problem, which is far more work
per node but prunes whole value sets at once and picks its own variable
order as it goes. Both start the incumbent at the log-zero sentinel, so
zero-probability values are pruned from the first node on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from time import perf_counter

import numpy as np

from .elim import _tree_singleton_bounds, mbe_compile
from .graph import build_bucket_tree, free_ordering
from .model import (
    DEFAULT_MAX_TABLE_CELLS,
    LOG_ZERO,
    Assignment,
    Evidence,
    Network,
    condition,
    restrict,
)


@dataclass
class SearchConfig:
    i_bound: int = 2
    time_limit: float | None = None
    seed: int = 0
    max_cells: int = DEFAULT_MAX_TABLE_CELLS


@dataclass
class SolveResult:
    best_assignment: Assignment = field(default_factory=dict)
    best_log_value: float = LOG_ZERO
    completed: bool = False
    nodes_expanded: int = 0
    elapsed: float = 0.0
    anytime_trace: list[tuple[float, float]] = field(default_factory=list)


def count_nodes(result: SolveResult) -> int:
    return result.nodes_expanded


class _TimeUp(Exception):
    pass


class _Incumbent:
    """Best-so-far tracker; trace timestamps are forced strictly increasing."""

    def __init__(self, t0: float):
        self.t0 = t0
        self.value = LOG_ZERO
        self.assignment: Assignment = {}
        self.trace: list[tuple[float, float]] = []

    def offer(self, value: float, assignment: Assignment) -> None:
        if value <= self.value:
            return
        self.value = value
        self.assignment = assignment
        t = perf_counter() - self.t0
        if self.trace and t <= self.trace[-1][0]:
            t = math.nextafter(self.trace[-1][0], math.inf)
        self.trace.append((t, value))


def _compiled(f):
    """(flat values, scope, element strides) for fast lookups."""
    vals = np.ascontiguousarray(f.values)
    strides = []
    acc = 1
    for d in reversed(vals.shape):
        strides.append(acc)
        acc *= d
    return vals.ravel(), f.scope, tuple(reversed(strides))


def bbmb_solve(net: Network, evidence: Evidence | None, cfg: SearchConfig) -> SolveResult:
    """Branch and bound with a precompiled mini-bucket heuristic.

    Variables are instantiated in reverse elimination order. At a node the
    guiding value is f = g + h in log space: g sums the original factors
    already fully instantiated, h sums compiled tables generated by
    not-yet-instantiated buckets whose scope is fully instantiated. Values
    are tried in decreasing f (ties toward the lower value) and pruned when
    f <= L. One node = one value-extension test.
    """
    evidence = dict(evidence or {})
    t0 = perf_counter()
    ordering = free_ordering(net, evidence, cfg.seed)
    heur = mbe_compile(net, evidence, ordering, cfg.i_bound, cfg.max_cells)
    order = ordering.order
    m = len(order)
    inc = _Incumbent(t0)
    if m == 0:
        inc.offer(heur.constant, dict(evidence))
        return SolveResult(
            dict(evidence), heur.constant, True, 0, perf_counter() - t0, inc.trace
        )

    adds: list[list] = [[] for _ in range(m)]
    subs: list[list] = [[] for _ in range(m)]
    for k in range(m):
        for f in heur.cpts_by_bucket[k]:
            adds[k].append(_compiled(f))
    for src, dest, lam in heur.intermediates:
        if dest < m:
            adds[dest].append(_compiled(lam))
        subs[src].append(_compiled(lam))

    dims = net.domain_sizes
    aval = [0] * net.n
    for v, x in evidence.items():
        aval[v] = x
    deadline = t0 + cfg.time_limit if cfg.time_limit is not None else None
    state = {"L": LOG_ZERO, "nodes": 0}

    def dfs(p: int, above: float) -> None:
        if deadline is not None and perf_counter() > deadline:
            raise _TimeUp
        v = order[p]
        base = above
        for flat, sc, st in subs[p]:
            idx = 0
            for u, s in zip(sc, st):
                idx += aval[u] * s
            base -= flat[idx]
        cands = []
        for x in range(dims[v]):
            aval[v] = x
            fx = base
            for flat, sc, st in adds[p]:
                idx = 0
                for u, s in zip(sc, st):
                    idx += aval[u] * s
                fx += flat[idx]
            cands.append((fx, x))
        state["nodes"] += len(cands)
        cands.sort(key=lambda c: (-c[0], c[1]))
        for fx, x in cands:
            if fx <= state["L"]:
                break
            aval[v] = x
            if p == 0:
                state["L"] = fx
                inc.offer(fx, {u: aval[u] for u in range(net.n)})
            else:
                dfs(p - 1, fx)

    completed = True
    try:
        dfs(m - 1, heur.bound)
    except _TimeUp:
        completed = False
    return SolveResult(
        inc.assignment,
        inc.value,
        completed,
        state["nodes"],
        perf_counter() - t0,
        inc.trace,
    )


def bbbt_solve(net: Network, evidence: Evidence | None, cfg: SearchConfig) -> SolveResult:
    """Branch and bound with singleton bounds recomputed at every node.

    One bucket tree is built from the evidence-conditioned problem; per
    node the factors are clamped to the partial assignment and the
    mini-bucket tree propagation reruns on the same tree. Values of every
    unassigned variable with bound <= L are pruned; the search branches on
    the variable with the smallest surviving value set (ties toward the
    lowest id) and tries values in decreasing bound order. A node is one
    bounding step; complete assignments are evaluated inline.
    """
    evidence = dict(evidence or {})
    t0 = perf_counter()
    ordering = free_ordering(net, evidence, cfg.seed)
    td = build_bucket_tree(net, ordering, evidence)
    order = ordering.order
    m = len(order)
    base_factors = [restrict(f, evidence) for f in net.factors()]
    inc = _Incumbent(t0)
    if m == 0:
        val = sum(float(f.values) for f in base_factors)
        inc.offer(val, dict(evidence))
        return SolveResult(dict(evidence), val, True, 0, perf_counter() - t0, inc.trace)

    touching = {
        v: [i for i, f in enumerate(base_factors) if v in f.scope] for v in order
    }
    dims = net.domain_sizes
    deadline = t0 + cfg.time_limit if cfg.time_limit is not None else None
    state = {"L": LOG_ZERO, "nodes": 0}

    def rec(factors: list, partial: Assignment) -> None:
        if deadline is not None and perf_counter() > deadline:
            raise _TimeUp
        state["nodes"] += 1
        mz = _tree_singleton_bounds(
            td, factors, dims, cfg.i_bound, set(partial), None
        )
        best_pick = None
        for v in order:
            if v in partial:
                continue
            vec = mz[v]
            live = [x for x in range(dims[v]) if vec[x] > state["L"]]
            if not live:
                return
            key = (len(live), v)
            if best_pick is None or key < best_pick[0]:
                best_pick = (key, v, live, vec)
        _, v, live, vec = best_pick
        live.sort(key=lambda x: (-vec[x], x))
        for x in live:
            if vec[x] <= state["L"]:
                break
            child = factors[:]
            for i in touching[v]:
                if v in child[i].scope:
                    child[i] = condition(child[i], v, x)
            if len(partial) + 1 == m:
                val = sum(float(f.values) for f in child)
                if val > state["L"]:
                    state["L"] = val
                    full = dict(evidence)
                    full.update(partial)
                    full[v] = x
                    inc.offer(val, full)
            else:
                partial[v] = x
                rec(child, partial)
                del partial[v]

    completed = True
    try:
        rec(base_factors, {})
    except _TimeUp:
        completed = False
    return SolveResult(
        inc.assignment,
        inc.value,
        completed,
        state["nodes"],
        perf_counter() - t0,
        inc.trace,
    )
