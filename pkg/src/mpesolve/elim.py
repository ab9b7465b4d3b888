"""Bucket elimination: exact solving, singleton max-marginals, and compiled
mini-bucket upper bounds.

The mini-bucket relaxation splits a set of functions into parts whose
combined scope stays within an i-bound, then maximizes each part on its
own, so everything it computes upper-bounds the exact counterpart. The
partition rule is open in general; here factors are packed first-fit after
sorting by (scope size descending, sorted scope) so a partition depends
only on the multiset of scopes, and tree messages let functions that do
not touch the eliminated variables pass through unchanged. Under that rule
the upward half of the tree propagation builds exactly the same
intermediate functions as the compiled bound along the same ordering,
which is what ties mbe_compile and mbte together (and is tested).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Ordering, TreeDecomposition
from .model import (
    DEFAULT_MAX_TABLE_CELLS,
    Assignment,
    Evidence,
    Factor,
    Network,
    max_eliminate,
    multiply,
    restrict,
)

# For each uninstantiated variable, its max-marginal table in log space.
SingletonBounds = dict[int, np.ndarray]


def _partition_scopes(scopes: list[tuple[int, ...]], i_bound: int) -> list[list[int]]:
    order = sorted(
        range(len(scopes)), key=lambda j: (-len(scopes[j]), tuple(sorted(scopes[j])))
    )
    parts: list[list[int]] = []
    unions: list[set[int]] = []
    for j in order:
        s = set(scopes[j])
        for k, u in enumerate(unions):
            if len(u | s) <= i_bound:
                parts[k].append(j)
                unions[k] |= s
                break
        else:
            parts.append([j])
            unions.append(s)
    return parts


def partition_minibuckets(factors: list[Factor], i_bound: int) -> list[list[Factor]]:
    """First-fit decreasing partition under the scope-union cap.

    Every factor lands in exactly one part. A part's combined scope has at
    most max(i_bound, largest single scope) variables: a factor wider than
    the bound gets a part of its own.
    """
    groups = _partition_scopes([f.scope for f in factors], i_bound)
    return [[factors[j] for j in grp] for grp in groups]


def be_mpe(
    net: Network,
    evidence: Evidence | None,
    ordering: Ordering,
    max_cells: int = DEFAULT_MAX_TABLE_CELLS,
) -> tuple[float, Assignment]:
    """Exact MPE by bucket elimination along the given ordering.

    Returns the optimal log value and one maximizing complete assignment
    (evidence included). Ties in the backward recovery pass break toward
    the lowest value. Raises ResourceLimitError when an intermediate table
    would exceed max_cells.
    """
    evidence = dict(evidence or {})
    order = ordering.order
    if set(order) != set(range(net.n)) - set(evidence):
        raise ValueError("ordering must cover exactly the non-evidence variables")
    m = len(order)
    pos = {v: k for k, v in enumerate(order)}
    constant = 0.0
    buckets: list[list[Factor]] = [[] for _ in range(m)]
    for f in net.factors():
        g = restrict(f, evidence)
        if g.scope:
            buckets[min(pos[v] for v in g.scope)].append(g)
        else:
            constant += float(g.values)
    assignment = dict(evidence)
    if m == 0:
        return constant, assignment
    bucket_products: list[Factor] = []
    for k, v in enumerate(order):
        prod = multiply(buckets[k], max_cells=max_cells)
        bucket_products.append(prod)
        msg = max_eliminate(prod, [v])
        if msg.scope:
            buckets[min(pos[u] for u in msg.scope)].append(msg)
        else:
            constant += float(msg.values)
    # backward pass: every variable later in the ordering is already fixed,
    # so each bucket product collapses to a one-variable table
    for k in range(m - 1, -1, -1):
        g = restrict(bucket_products[k], assignment)
        assignment[order[k]] = int(np.argmax(g.values))
    return constant, assignment


def _edge_message(
    cluster: list[Factor],
    elim_vars: frozenset[int] | set[int],
    i_bound: int | None,
    max_cells: int | None,
) -> list[Factor]:
    touched: list[Factor] = []
    out: list[Factor] = []
    for g in cluster:
        (touched if elim_vars & set(g.scope) else out).append(g)
    if touched:
        parts = [touched] if i_bound is None else partition_minibuckets(touched, i_bound)
        for part in parts:
            prod = multiply(part, max_cells=max_cells)
            out.append(max_eliminate(prod, elim_vars & set(prod.scope)))
    return out


def _tree_messages(
    td: TreeDecomposition,
    factors: list[Factor],
    i_bound: int | None,
    max_cells: int | None,
):
    """Two-pass message propagation over a bucket tree. factors must be
    indexed like td.psi (already conditioned on whatever is fixed)."""
    psi_f = [[factors[i] for i in td.psi[k]] for k in range(td.m)]
    msgs: dict[tuple[int, int], list[Factor]] = {}
    for u in range(td.m):  # leaves first; a parent always has a larger index
        p = td.parent[u]
        if p is None:
            continue
        cluster = psi_f[u][:]
        for c in td.children[u]:
            cluster += msgs[(c, u)]
        msgs[(u, p)] = _edge_message(cluster, td.elim(u, p), i_bound, max_cells)
    for u in range(td.m - 1, -1, -1):  # root first
        p = td.parent[u]
        from_parent = msgs[(p, u)] if p is not None else []
        for c in td.children[u]:
            cluster = psi_f[u][:] + from_parent
            for c2 in td.children[u]:
                if c2 != c:
                    cluster += msgs[(c2, u)]
            msgs[(u, c)] = _edge_message(cluster, td.elim(u, c), i_bound, max_cells)
    return psi_f, msgs


def _tree_singleton_bounds(
    td: TreeDecomposition,
    factors: list[Factor],
    dims: list[int],
    i_bound: int | None,
    assigned: set[int],
    max_cells: int | None,
) -> SingletonBounds:
    if td.m == 0:
        return {}
    psi_f, msgs = _tree_messages(td, factors, i_bound, max_cells)
    out: SingletonBounds = {}
    for k in range(td.m):
        x = td.bucket_var[k]
        if x in assigned:
            continue
        cluster = psi_f[k][:]
        for c in td.children[k]:
            cluster += msgs[(c, k)]
        if td.parent[k] is not None:
            cluster += msgs[(td.parent[k], k)]
        parts = [cluster] if i_bound is None else partition_minibuckets(cluster, i_bound)
        z = np.zeros(dims[x])
        for part in parts:
            prod = multiply(part, max_cells=max_cells)
            res = max_eliminate(prod, set(prod.scope) - {x})
            z = z + (res.values if res.scope else float(res.values))
        out[x] = z
    return out


def cte_singletons(
    net: Network,
    td: TreeDecomposition,
    evidence: Evidence | None = None,
    max_cells: int = DEFAULT_MAX_TABLE_CELLS,
) -> SingletonBounds:
    """Exact singleton max-marginals z_j(x) for every free variable by
    two-pass cluster-tree propagation over a bucket tree.

    td must have been built from net with the same evidence. Each z_j(x) is
    the best log value among complete assignments with X_j = x, so
    max_x z_j(x) is the MPE value for every j.
    """
    evidence = dict(evidence or {})
    factors = [restrict(f, evidence) for f in net.factors()]
    return _tree_singleton_bounds(td, factors, net.domain_sizes, None, set(), max_cells)


def mbte(
    net: Network,
    td: TreeDecomposition,
    partial: Assignment | None,
    i_bound: int,
) -> SingletonBounds:
    """Mini-bucket tree propagation conditioned on a partial assignment.

    Returns mz_j(x) >= z_j(x) for every unassigned variable: an upper bound
    on the best complete extension of partial with X_j = x. partial must
    include whatever evidence td was built with; the tree is reused as is,
    factors are just clamped. With i_bound at least the tree-width plus one
    the bounds are exact.
    """
    partial = dict(partial or {})
    factors = [restrict(f, partial) for f in net.factors()]
    assigned = {v for v in td.bucket_var if v in partial}
    return _tree_singleton_bounds(
        td, factors, net.domain_sizes, i_bound, assigned, None
    )


@dataclass
class CompiledHeuristic:
    """Mini-bucket tables compiled once along a fixed ordering.

    cpts_by_bucket[k] holds the conditioned input factors whose earliest
    scope variable (in elimination order) is order[k]. intermediates holds
    (source bucket, destination bucket, table) triples, where destination
    is the bucket of the table's own earliest variable and len(order) marks
    tables with empty scope. constant collects input factors fully fixed by
    evidence; bound = constant plus all empty-scope intermediates, an upper
    bound on the MPE log value.
    """

    ordering: Ordering
    bound: float
    constant: float
    cpts_by_bucket: list[list[Factor]]
    intermediates: list[tuple[int, int, Factor]]
    minibucket_count: int


def mbe_compile(
    net: Network,
    evidence: Evidence | None,
    ordering: Ordering,
    i_bound: int,
    max_cells: int = DEFAULT_MAX_TABLE_CELLS,
) -> CompiledHeuristic:
    """Mini-bucket elimination along the ordering: each bucket's contents
    are partitioned (partition_minibuckets), every part is max-eliminated
    over the bucket variable, and outputs route to the bucket of their
    earliest remaining variable."""
    evidence = dict(evidence or {})
    order = ordering.order
    if set(order) != set(range(net.n)) - set(evidence):
        raise ValueError("ordering must cover exactly the non-evidence variables")
    m = len(order)
    pos = {v: k for k, v in enumerate(order)}
    constant = 0.0
    cpts_by_bucket: list[list[Factor]] = [[] for _ in range(m)]
    for f in net.factors():
        g = restrict(f, evidence)
        if g.scope:
            cpts_by_bucket[min(pos[v] for v in g.scope)].append(g)
        else:
            constant += float(g.values)
    work = [list(b) for b in cpts_by_bucket]
    intermediates: list[tuple[int, int, Factor]] = []
    count = 0
    scalars = 0.0
    for k, v in enumerate(order):
        parts = partition_minibuckets(work[k], i_bound)
        count += len(parts)
        for part in parts:
            prod = multiply(part, max_cells=max_cells)
            lam = max_eliminate(prod, [v])
            if lam.scope:
                dest = min(pos[u] for u in lam.scope)
                work[dest].append(lam)
                intermediates.append((k, dest, lam))
            else:
                scalars += float(lam.values)
                intermediates.append((k, m, lam))
    return CompiledHeuristic(
        ordering, constant + scalars, constant, cpts_by_bucket, intermediates, count
    )
