"""Discrete network model and log-space factor algebra.

Probabilities are natural logs throughout. A true zero is the LOG_ZERO
sentinel (IEEE -inf): it absorbs under addition, which is the log-space
product, and it loses every maximization, so deterministic tables need no
special casing anywhere downstream. exp(LOG_ZERO) is exactly 0.0.

A Factor table is a dense float64 ndarray with one axis per scope variable,
in scope order. Raveled in C order the last scope variable varies fastest.
File round-trips rely on this layout; nothing may silently reorder axes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

LOG_ZERO = float("-inf")

# Ceiling on cells in any single intermediate table. Exact solvers refuse
# allocations past this instead of thrashing the machine.
DEFAULT_MAX_TABLE_CELLS = 1 << 27

Assignment = dict[int, int]
# Evidence is an Assignment whose variables are held fixed by every solver.
Evidence = dict[int, int]


class ResourceLimitError(Exception):
    """An intermediate table would exceed the configured cell budget."""


@dataclass(frozen=True)
class Variable:
    id: int
    domain_size: int


def log_table(probs) -> np.ndarray:
    """Linear-space probabilities to a log table; zeros become LOG_ZERO."""
    arr = np.asarray(probs, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.log(arr)


class Factor:
    """A log-space function over an ordered tuple of variable ids."""

    __slots__ = ("scope", "values")

    def __init__(self, scope: Iterable[int], values):
        scope = tuple(scope)
        vals = np.asarray(values, dtype=np.float64)
        if vals.ndim != len(scope):
            raise ValueError(
                f"table has {vals.ndim} axes but scope has {len(scope)} variables"
            )
        if len(set(scope)) != len(scope):
            raise ValueError(f"duplicate variable in scope {scope}")
        self.scope = scope
        self.values = vals

    @property
    def cells(self) -> int:
        return self.values.size

    def domain_of(self, var: int) -> int:
        return self.values.shape[self.scope.index(var)]

    def __repr__(self) -> str:
        return f"Factor(scope={self.scope}, shape={self.values.shape})"


def _aligned(f: Factor, pos: dict[int, int], ndim: int) -> np.ndarray:
    """View of f.values broadcastable against a table over a superset scope.

    pos maps variable id to axis in the target table.
    """
    order = sorted(range(len(f.scope)), key=lambda k: pos[f.scope[k]])
    vals = f.values.transpose(order)
    shape = [1] * ndim
    for k in order:
        shape[pos[f.scope[k]]] = f.values.shape[k]
    return vals.reshape(shape)


def multiply(factors: Sequence[Factor], max_cells: int | None = None) -> Factor:
    """Log-space product: scope is the sorted union, values add.

    Raises ResourceLimitError when the result table would exceed max_cells.
    """
    factors = list(factors)
    if not factors:
        raise ValueError("multiply needs at least one factor")
    if len(factors) == 1:
        f = factors[0]
        return Factor(f.scope, f.values.copy())
    dims: dict[int, int] = {}
    for f in factors:
        for v, d in zip(f.scope, f.values.shape):
            if dims.setdefault(v, d) != d:
                raise ValueError(f"conflicting domain sizes for variable {v}")
    scope = tuple(sorted(dims))
    pos = {v: k for k, v in enumerate(scope)}
    cells = 1
    for v in scope:
        cells *= dims[v]
    if max_cells is not None and cells > max_cells:
        raise ResourceLimitError(
            f"product table over {scope} needs {cells} cells, cap is {max_cells}"
        )
    out = np.zeros([dims[v] for v in scope])
    for f in factors:
        out += _aligned(f, pos, len(scope))
    return Factor(scope, out)


def condition(f: Factor, var: int, value: int) -> Factor:
    """Fix one scope variable to a value, dropping its axis."""
    if var not in f.scope:
        raise ValueError(f"variable {var} not in scope {f.scope}")
    ax = f.scope.index(var)
    idx: list = [slice(None)] * len(f.scope)
    idx[ax] = value
    return Factor(f.scope[:ax] + f.scope[ax + 1 :], f.values[tuple(idx)])


def restrict(f: Factor, assignment: Assignment) -> Factor:
    """Condition on every scope variable that the assignment covers."""
    if not any(v in assignment for v in f.scope):
        return f
    idx = tuple(assignment.get(v, slice(None)) for v in f.scope)
    scope = tuple(v for v in f.scope if v not in assignment)
    return Factor(scope, f.values[idx])


def max_eliminate(f: Factor, variables: Iterable[int]) -> Factor:
    """Maximize out the given scope variables; remaining order is kept.

    Eliminating everything leaves a 0-dimensional (scalar) factor.
    """
    elim = set(variables)
    if not elim:
        return Factor(f.scope, f.values.copy())
    missing = elim - set(f.scope)
    if missing:
        raise ValueError(f"variables {sorted(missing)} not in scope {f.scope}")
    axes = tuple(k for k, v in enumerate(f.scope) if v in elim)
    scope = tuple(v for v in f.scope if v not in elim)
    return Factor(scope, f.values.max(axis=axes))


class Network:
    """Bayesian network over variables 0..n-1 with one CPT per variable.

    cpts[i] has scope (parents of i in ascending id order, then i); the
    child axis is last. Tables are natural logs and every parent
    configuration row must sum to one in linear space (1e-9).

    unaries holds optional extra single-variable log factors (channel
    likelihoods and the like). They take part in evaluation and in every
    solver but are not CPTs and carry no normalization requirement.
    """

    def __init__(
        self,
        domain_sizes: Sequence[int],
        cpts: Sequence[Factor],
        unaries: Sequence[Factor] = (),
        check: bool = True,
    ):
        self.domain_sizes = list(domain_sizes)
        self.cpts = list(cpts)
        self.unaries = tuple(unaries)
        if check:
            self._validate()

    @property
    def n(self) -> int:
        return len(self.domain_sizes)

    @property
    def variables(self) -> list[Variable]:
        return [Variable(i, d) for i, d in enumerate(self.domain_sizes)]

    def parents(self, i: int) -> tuple[int, ...]:
        return self.cpts[i].scope[:-1]

    def factors(self) -> list[Factor]:
        """All log factors defining the joint: CPTs then unaries."""
        return list(self.cpts) + list(self.unaries)

    def topological_order(self) -> list[int]:
        n = self.n
        children: list[list[int]] = [[] for _ in range(n)]
        indeg = [0] * n
        for i in range(n):
            for p in self.parents(i):
                children[p].append(i)
                indeg[i] += 1
        frontier = [i for i in range(n) if indeg[i] == 0]
        order: list[int] = []
        while frontier:
            v = frontier.pop()
            order.append(v)
            for c in children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    frontier.append(c)
        if len(order) != n:
            raise ValueError("parent structure is cyclic")
        return order

    def _validate(self) -> None:
        n = self.n
        if len(self.cpts) != n:
            raise ValueError(f"{len(self.cpts)} CPTs for {n} variables")
        for i, f in enumerate(self.cpts):
            if not f.scope or f.scope[-1] != i:
                raise ValueError(f"cpt {i} must have child axis last, got {f.scope}")
            for v, d in zip(f.scope, f.values.shape):
                if d != self.domain_sizes[v]:
                    raise ValueError(f"cpt {i} axis for {v} has size {d}")
            rows = np.exp(f.values).sum(axis=-1)
            if not np.allclose(rows, 1.0, atol=1e-9, rtol=0.0):
                raise ValueError(f"cpt {i} rows are not normalized")
        for f in self.unaries:
            if len(f.scope) != 1:
                raise ValueError(f"unary factor with scope {f.scope}")
            if f.values.shape[0] != self.domain_sizes[f.scope[0]]:
                raise ValueError(f"unary factor over {f.scope[0]} has wrong size")
        self.topological_order()


def evaluate(net: Network, assignment: Assignment) -> float:
    """Log probability of a complete assignment: sum of table lookups."""
    total = 0.0
    for f in net.factors():
        try:
            idx = tuple(assignment[v] for v in f.scope)
        except KeyError as e:
            raise ValueError(f"assignment does not cover variable {e.args[0]}") from None
        val = float(f.values[idx])
        if val == LOG_ZERO:
            return LOG_ZERO
        total += val
    return total
