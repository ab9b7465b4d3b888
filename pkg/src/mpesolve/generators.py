"""Seeded instance generators: uniform random, noisy-OR, grid, and coding
networks, plus forward-sampled evidence and bit-error scoring.

All randomness flows through numpy's PCG64 via default_rng(seed), drawn in
a fixed order (structure, then tables, then any channel noise), so a
(spec, seed) pair is a portable test vector. In the coding family the
channel noise is drawn as standard normals and scaled by sigma afterwards,
which gives common random numbers across sigma sweeps that share a seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Evidence, Factor, Network, log_table


@dataclass(frozen=True)
class GenSpec:
    """Parameters for one instance family; unused fields are ignored.

    For coding networks k is the number of information bits (the network
    then has 2k variables) and p parity parents are drawn per check bit.
    """

    family: str = "uniform"
    n: int = 10
    k: int = 2
    c: int = 8
    p: int = 2
    p_noise: float = 0.2
    p_leak: float = 0.01
    sigma: float = 0.32
    seed: int = 0
    grid_noisy_or: bool = False


@dataclass(frozen=True)
class CodingTruth:
    input_bits: tuple[int, ...]
    channel_outputs: tuple[float, ...]


def _check(spec: GenSpec) -> None:
    if spec.family in ("uniform", "noisy-or"):
        if spec.n < 1 or spec.k < 2:
            raise ValueError("need n >= 1 and k >= 2")
        if not (0 <= spec.c <= spec.n):
            raise ValueError("need 0 <= c <= n")
        if not (0 <= spec.p < spec.n):
            raise ValueError("need 0 <= p < n")
    elif spec.family == "grid":
        s = math.isqrt(spec.n)
        if spec.n < 1 or s * s != spec.n:
            raise ValueError("grid size must be a perfect square")
        if spec.k < 2:
            raise ValueError("need k >= 2")
    elif spec.family == "coding":
        if spec.k < 1 or not (1 <= spec.p <= spec.k):
            raise ValueError("need 1 <= p <= k information bits")
        if spec.sigma <= 0:
            raise ValueError("sigma must be positive")
    else:
        raise ValueError(f"unknown family {spec.family!r}")


def _random_structure(rng: np.random.Generator, n: int, c: int, p: int):
    """c variables picked uniformly get up to p parents from their strictly
    preceding variables; everything else is a root."""
    parents: list[tuple[int, ...]] = [() for _ in range(n)]
    # variable 0 has no predecessors to draw from, so the c-subset comes
    # from 1..n-1 unless c forces everything
    if c <= n - 1:
        chosen = sorted(int(v) for v in rng.choice(n - 1, size=c, replace=False) + 1)
    else:
        chosen = list(range(n))
    for v in chosen:
        take = min(p, v)
        if take:
            parents[v] = tuple(
                sorted(int(u) for u in rng.choice(v, size=take, replace=False))
            )
    return parents


def _uniform_cpt(rng: np.random.Generator, parents, child, k: int) -> Factor:
    raw = rng.uniform(size=[k] * (len(parents) + 1))
    raw /= raw.sum(axis=-1, keepdims=True)
    return Factor(tuple(parents) + (child,), log_table(raw))


def _noisyor_cpt(spec: GenSpec, parents, child, k: int) -> Factor:
    """P(child=0 | pa) = p_leak times p_noise per active (nonzero) parent;
    the leftover mass is split evenly over the nonzero child values."""
    shape = [k] * (len(parents) + 1)
    table = np.empty(shape)
    for t in np.ndindex(*shape[:-1]):
        active = sum(1 for x in t if x != 0)
        p0 = spec.p_leak * spec.p_noise ** active
        table[t] = [p0] + [(1.0 - p0) / (k - 1)] * (k - 1)
    return Factor(tuple(parents) + (child,), log_table(table))


def gen_uniform(spec: GenSpec) -> Network:
    """Random DAG over 0..n-1 with uniformly filled, normalized CPTs."""
    _check(spec)
    rng = np.random.default_rng(spec.seed)
    parents = _random_structure(rng, spec.n, spec.c, spec.p)
    cpts = [
        _uniform_cpt(rng, parents[v], v, spec.k) for v in range(spec.n)
    ]
    return Network([spec.k] * spec.n, cpts)


def gen_noisyor(spec: GenSpec) -> Network:
    """Same structure as gen_uniform, noisy-OR tables for non-roots."""
    _check(spec)
    rng = np.random.default_rng(spec.seed)
    parents = _random_structure(rng, spec.n, spec.c, spec.p)
    cpts = []
    for v in range(spec.n):
        if parents[v]:
            cpts.append(_noisyor_cpt(spec, parents[v], v, spec.k))
        else:
            cpts.append(_uniform_cpt(rng, (), v, spec.k))
    return Network([spec.k] * spec.n, cpts)


def gen_grid(spec: GenSpec) -> Network:
    """Square lattice in row-major order, each cell conditioned on its left
    and top neighbors; tables uniform or noisy-OR per grid_noisy_or."""
    _check(spec)
    rng = np.random.default_rng(spec.seed)
    s = math.isqrt(spec.n)
    cpts = []
    for v in range(spec.n):
        r, col = divmod(v, s)
        parents = tuple(
            u for u in ((v - s if r > 0 else None), (v - 1 if col > 0 else None))
            if u is not None
        )
        if parents and spec.grid_noisy_or:
            cpts.append(_noisyor_cpt(spec, parents, v, spec.k))
        else:
            cpts.append(_uniform_cpt(rng, parents, v, spec.k))
    return Network([spec.k] * spec.n, cpts)


def gen_coding(spec: GenSpec) -> tuple[Network, Evidence, CodingTruth]:
    """Two-layer parity-check network with gaussian channel observations.

    Variables 0..k-1 are information bits with uniform priors; k..2k-1 are
    parity bits, each a deterministic XOR of p distinct information bits.
    Each of the 2k bits gets a unary likelihood factor for its channel
    output y = (1 - 2b) + sigma * noise, normalized over the bit values.
    The channel lives entirely in those factors, so the evidence is empty.
    """
    _check(spec)
    rng = np.random.default_rng(spec.seed)
    k = spec.k
    uniform = log_table(np.array([0.5, 0.5]))
    cpts = [Factor((v,), uniform.copy()) for v in range(k)]
    parent_sets = [
        tuple(sorted(int(u) for u in rng.choice(k, size=spec.p, replace=False)))
        for _ in range(k)
    ]
    for j, pa in enumerate(parent_sets):
        shape = [2] * (spec.p + 1)
        table = np.zeros(shape)
        for t in np.ndindex(*shape[:-1]):
            table[t][sum(t) % 2] = 1.0
        cpts.append(Factor(pa + (k + j,), log_table(table)))
    bits = [int(b) for b in rng.integers(2, size=k)]
    bits += [sum(bits[u] for u in pa) % 2 for pa in parent_sets]
    eps = rng.standard_normal(2 * k)
    outputs = []
    unaries = []
    for v, b in enumerate(bits):
        y = (1.0 - 2.0 * b) + spec.sigma * eps[v]
        outputs.append(float(y))
        ll = -((y - (1.0 - 2.0 * np.arange(2))) ** 2) / (2.0 * spec.sigma**2)
        ll -= np.log(np.exp(ll - ll.max()).sum()) + ll.max()
        unaries.append(Factor((v,), ll))
    net = Network([2] * (2 * k), cpts, tuple(unaries))
    truth = CodingTruth(tuple(bits[:k]), tuple(outputs))
    return net, {}, truth


def generate(spec: GenSpec):
    """Dispatch on spec.family; returns (net, evidence, truth_or_None)."""
    if spec.family == "coding":
        return gen_coding(spec)
    gen = {"uniform": gen_uniform, "noisy-or": gen_noisyor, "grid": gen_grid}
    if spec.family not in gen:
        raise ValueError(f"unknown family {spec.family!r}")
    return gen[spec.family](spec), {}, None


def sample_evidence(net: Network, count: int, seed: int = 0) -> Evidence:
    """Forward-sample one full assignment, then fix `count` uniformly
    chosen variables to their sampled values. The result always has
    positive probability under the network."""
    if count > net.n:
        raise ValueError("count exceeds the number of variables")
    rng = np.random.default_rng(seed)
    sample: dict[int, int] = {}
    for v in net.topological_order():
        f = net.cpts[v]
        row = np.exp(f.values[tuple(sample[u] for u in f.scope[:-1])])
        row = row / row.sum()
        sample[v] = int(rng.choice(net.domain_sizes[v], p=row))
    picked = rng.choice(net.n, size=count, replace=False)
    return {int(v): sample[int(v)] for v in picked}


def bit_error_rate(decoded, truth: CodingTruth) -> float:
    """Fraction of information bits the decoded assignment gets wrong."""
    k = len(truth.input_bits)
    wrong = sum(1 for v in range(k) if decoded[v] != truth.input_bits[v])
    return wrong / k
