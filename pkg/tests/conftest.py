"""Shared test oracles.

The enumeration oracles below build the full joint log table with raw numpy
broadcasting straight from the CPT arrays. They deliberately avoid the
package's factor algebra so they can stand as an independent check of it.
"""
from __future__ import annotations

import numpy as np

from mpesolve.model import Factor, Network, log_table


def joint_log_tensor(net: Network) -> np.ndarray:
    """Full joint log table with one axis per variable, in id order."""
    shape = tuple(net.domain_sizes)
    joint = np.zeros(shape)
    for f in net.factors():
        order = np.argsort(f.scope)
        vals = np.transpose(f.values, order)
        ax = [1] * net.n
        for k in order:
            ax[f.scope[k]] = f.values.shape[k]
        joint = joint + vals.reshape(ax)
    return joint


def enum_mpe(net: Network, evidence: dict[int, int] | None = None):
    """(log value, one maximizing complete assignment) by brute force.

    Ties break toward the lexicographically smallest assignment, which is
    what np.argmax on the raveled table gives.
    """
    evidence = evidence or {}
    joint = joint_log_tensor(net)
    idx = tuple(evidence.get(v, slice(None)) for v in range(net.n))
    sub = joint[idx]
    free = [v for v in range(net.n) if v not in evidence]
    flat = int(np.argmax(sub))
    best = dict(evidence)
    if free:
        for v, val in zip(free, np.unravel_index(flat, sub.shape)):
            best[v] = int(val)
    value = float(sub.max()) if sub.size else float(joint[idx])
    return value, best


def enum_singletons(net: Network, evidence: dict[int, int] | None = None):
    """Exact z_j(x) = max joint log value among completions with X_j = x."""
    evidence = evidence or {}
    joint = joint_log_tensor(net)
    idx = tuple(evidence.get(v, slice(None)) for v in range(net.n))
    sub = joint[idx]
    free = [v for v in range(net.n) if v not in evidence]
    out = {}
    for k, v in enumerate(free):
        axes = tuple(a for a in range(len(free)) if a != k)
        out[v] = sub.max(axis=axes) if axes else sub.copy()
    return out


def random_cpt(rng: np.random.Generator, parents, child, k: int) -> Factor:
    """CPT with independent uniform(0,1) columns, normalized per row."""
    shape = [k] * (len(parents) + 1)
    raw = rng.uniform(size=shape)
    raw /= raw.sum(axis=-1, keepdims=True)
    return Factor(tuple(parents) + (child,), log_table(raw))


def random_net(seed: int, n: int, k: int = 2, c: int | None = None, p: int = 2) -> Network:
    """Small random network for oracle tests: c variables get p parents
    drawn from their predecessors, the rest are roots."""
    rng = np.random.default_rng(seed)
    if c is None:
        c = max(0, n - 2)
    with_parents = set(rng.choice(n, size=c, replace=False).tolist()) if c else set()
    cpts = []
    for i in range(n):
        if i in with_parents and i > 0:
            m = min(p, i)
            pa = sorted(rng.choice(i, size=m, replace=False).tolist())
        else:
            pa = []
        cpts.append(random_cpt(rng, pa, i, k))
    return Network([k] * n, cpts)
