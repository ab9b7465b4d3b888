"""Stochastic local search over the weighted-feature view of MPE.

Every entry of every (evidence-conditioned) factor is a feature with
weight w = min(-log P, W_max); a complete assignment activates exactly one
feature per factor and its cost is the sum of active weights, so
minimizing cost maximizes probability up to the W_max cap on zero entries.
GLS and DLM share one best-improvement engine over the penalty-augmented
cost sum(w + lam) and differ only in which active features get their
penalty bumped at a local minimum; SLS keeps penalties at zero and mixes
noisy moves with restarts. Incumbents are always scored by the true
(unpenalized, uncapped) log value.
"""
from __future__ import annotations

from dataclasses import dataclass
from time import perf_counter

import numpy as np

from .model import LOG_ZERO, Assignment, Evidence, Network, evaluate, restrict
from .search import SolveResult, _Incumbent


@dataclass
class LSParams:
    seed: int = 0
    noise_p: float = 0.2
    restart_interval: int | None = None  # None: 10 * n flips
    penalty_increment: float = 1.0
    w_max: float = 1e6


def utility(w: float, lam: float) -> float:
    """Feature utility used by the guided penalty rule."""
    return w / (1.0 + lam)


class FeatureTable:
    """Per-factor flat weight, penalty, and raw log arrays with strides for
    O(1) active-cell lookups, plus which tables each variable touches.

    Factors fixed completely by evidence contribute constants only.
    """

    def __init__(self, net: Network, evidence: Evidence | None = None,
                 w_max: float = 1e6):
        self.net = net
        self.evidence = dict(evidence or {})
        self.w_max = float(w_max)
        self.scopes: list[tuple[int, ...]] = []
        self.weights: list[list[float]] = []
        self.penalties: list[list[float]] = []
        self.raw: list[list[float]] = []
        self.const_cost = 0.0
        self.const_log = 0.0
        self.const_zeros = 0
        touch: dict[int, list[tuple[int, int]]] = {}
        for f in net.factors():
            g = restrict(f, self.evidence)
            if not g.scope:
                v = float(g.values)
                self.const_cost += min(-v, self.w_max)
                if v == LOG_ZERO:
                    self.const_zeros += 1
                else:
                    self.const_log += v
                continue
            vals = np.ascontiguousarray(g.values, dtype=float)
            t = len(self.scopes)
            self.scopes.append(g.scope)
            flat = vals.ravel()
            self.raw.append(flat.tolist())
            self.weights.append(np.minimum(-flat, self.w_max).tolist())
            self.penalties.append([0.0] * flat.size)
            stride = 1
            strides = []
            for d in reversed(vals.shape):
                strides.append(stride)
                stride *= d
            strides.reverse()
            for v, s in zip(g.scope, strides):
                touch.setdefault(v, []).append((t, s))
        self.free_vars = sorted(
            v for v in range(net.n) if v not in self.evidence
        )
        self.touch = {v: touch.get(v, []) for v in self.free_vars}

    @property
    def m(self) -> int:
        return len(self.scopes)

    def cell(self, t: int, assignment: Assignment) -> int:
        idx = 0
        stride = 1
        for v in reversed(self.scopes[t]):
            idx += stride * assignment[v]
            stride *= self.net.domain_sizes[v]
        return idx


def ls_cost(ft: FeatureTable, assignment: Assignment) -> float:
    """Capped-weight cost of a complete assignment over the free variables;
    equals -evaluate(...) whenever no zero-probability entry is active."""
    total = ft.const_cost
    for t in range(ft.m):
        total += ft.weights[t][ft.cell(t, assignment)]
    return total


class _State:
    """Current point plus everything maintained incrementally: active cell
    per table, augmented cost, and the true log value split into its finite
    part and a count of zero-probability active cells."""

    def __init__(self, ft: FeatureTable):
        self.ft = ft
        self.cur: dict[int, int] = {}
        self.act: list[int] = []
        self.aug = 0.0
        self.log_sum = 0.0
        self.zeros = 0

    def scatter(self, rng: np.random.Generator) -> None:
        ft = self.ft
        dims = ft.net.domain_sizes
        self.cur = {v: int(rng.integers(dims[v])) for v in ft.free_vars}
        full = dict(ft.evidence)
        full.update(self.cur)
        self.act = [ft.cell(t, full) for t in range(ft.m)]
        self.aug = ft.const_cost
        self.log_sum = ft.const_log
        self.zeros = ft.const_zeros
        for t, a in enumerate(self.act):
            self.aug += ft.weights[t][a] + ft.penalties[t][a]
            r = ft.raw[t][a]
            if r == LOG_ZERO:
                self.zeros += 1
            else:
                self.log_sum += r

    def true_value(self) -> float:
        return LOG_ZERO if self.zeros else self.log_sum

    def delta(self, v: int, y: int) -> float:
        ft = self.ft
        dy = y - self.cur[v]
        d = 0.0
        for t, s in ft.touch[v]:
            a = self.act[t]
            b = a + s * dy
            d += (ft.weights[t][b] + ft.penalties[t][b]) - (
                ft.weights[t][a] + ft.penalties[t][a]
            )
        return d

    def apply(self, v: int, y: int) -> None:
        ft = self.ft
        dy = y - self.cur[v]
        for t, s in ft.touch[v]:
            a = self.act[t]
            b = a + s * dy
            self.aug += (ft.weights[t][b] + ft.penalties[t][b]) - (
                ft.weights[t][a] + ft.penalties[t][a]
            )
            ra, rb = ft.raw[t][a], ft.raw[t][b]
            if ra == LOG_ZERO:
                self.zeros -= 1
            else:
                self.log_sum -= ra
            if rb == LOG_ZERO:
                self.zeros += 1
            else:
                self.log_sum += rb
            self.act[t] = b
        self.cur[v] = y

    def snapshot(self) -> Assignment:
        full = dict(self.ft.evidence)
        full.update(self.cur)
        return full


_IMPROVE_EPS = 1e-12


def _best_move(st: _State, rng: np.random.Generator):
    """Best single-variable change by augmented delta; uniform random among
    exact ties; None when no strict improvement exists."""
    ft = st.ft
    dims = ft.net.domain_sizes
    best = None
    ties: list[tuple[int, int]] = []
    for v in ft.free_vars:
        x = st.cur[v]
        for y in range(dims[v]):
            if y == x:
                continue
            d = st.delta(v, y)
            if best is None or d < best:
                best = d
                ties = [(v, y)]
            elif d == best:
                ties.append((v, y))
    if best is None or best >= -_IMPROVE_EPS:
        return None
    return ties[int(rng.integers(len(ties)))] if len(ties) > 1 else ties[0]


def _penalize(st: _State, policy: str, increment: float) -> None:
    ft = st.ft
    if policy == "gls":
        utils = [
            utility(ft.weights[t][st.act[t]], ft.penalties[t][st.act[t]])
            for t in range(ft.m)
        ]
        mx = max(utils)
        chosen = [t for t in range(ft.m) if utils[t] == mx]
    else:
        chosen = list(range(ft.m))
    for t in chosen:
        ft.penalties[t][st.act[t]] += increment
        st.aug += increment


def _ls_solve(
    net: Network,
    evidence: Evidence | None,
    time_limit: float | None,
    params: LSParams | None,
    policy: str,
    stop_value: float | None,
) -> SolveResult:
    p = params or LSParams()
    rng = np.random.default_rng(p.seed)
    t0 = perf_counter()
    deadline = None if time_limit is None else t0 + time_limit
    ft = FeatureTable(net, evidence, p.w_max)
    inc = _Incumbent(t0)
    if not ft.free_vars:
        asg = dict(evidence or {})
        val = evaluate(net, asg)
        inc.offer(val, asg)
        return SolveResult(asg, val, False, 0, perf_counter() - t0, inc.trace)
    st = _State(ft)
    st.scatter(rng)
    if st.true_value() > inc.value:
        inc.offer(st.true_value(), st.snapshot())
    interval = p.restart_interval
    if interval is None:
        interval = 10 * net.n
    flips = 0
    since_restart = 0
    while True:
        if deadline is not None and perf_counter() >= deadline:
            break
        if stop_value is not None and inc.value >= stop_value - 1e-12:
            break
        if policy == "sls" and since_restart >= interval:
            st.scatter(rng)
            since_restart = 0
            if st.true_value() > inc.value:
                inc.offer(st.true_value(), st.snapshot())
            continue
        move = None
        if policy == "sls" and rng.random() < p.noise_p:
            v = ft.free_vars[int(rng.integers(len(ft.free_vars)))]
            k = net.domain_sizes[v]
            y = int(rng.integers(k - 1))
            if y >= st.cur[v]:
                y += 1
            move = (v, y)
        else:
            move = _best_move(st, rng)
        if move is None:
            if policy == "sls":
                since_restart += 1
                continue
            _penalize(st, policy, p.penalty_increment)
            continue
        st.apply(*move)
        flips += 1
        since_restart += 1
        if st.true_value() > inc.value:
            inc.offer(st.true_value(), st.snapshot())
    if not inc.assignment:
        inc.assignment = st.snapshot()
        inc.value = st.true_value()
    return SolveResult(
        inc.assignment, inc.value, False, flips, perf_counter() - t0, inc.trace
    )


def gls_solve(net, evidence, time_limit, params: LSParams | None = None,
              stop_value: float | None = None) -> SolveResult:
    """Guided local search: at a local minimum of the augmented cost, bump
    the penalty of every active feature of maximum utility w/(1+lam)."""
    return _ls_solve(net, evidence, time_limit, params, "gls", stop_value)


def dlm_solve(net, evidence, time_limit, params: LSParams | None = None,
              stop_value: float | None = None) -> SolveResult:
    """Discrete Lagrangian variant: every active feature is penalized at a
    local minimum."""
    return _ls_solve(net, evidence, time_limit, params, "dlm", stop_value)


def sls_solve(net, evidence, time_limit, params: LSParams | None = None,
              stop_value: float | None = None) -> SolveResult:
    """Plain stochastic hill climbing: noisy moves with probability
    noise_p, best-improvement otherwise, uniform restart every
    restart_interval flips. Penalties stay at zero."""
    return _ls_solve(net, evidence, time_limit, params, "sls", stop_value)
