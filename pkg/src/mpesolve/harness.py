"""Experiment orchestration: seeded instance batches, solver dispatch,
accuracy-ratio scoring, CSV plus assignment-sidecar output, and the
solved-fraction metric.

A batch is deterministic given its config: instance seeds are seed_base +
index, solvers get per-instance seeds, and rows come out sorted by
(instance, algorithm). Timing columns are the only thing two identical
runs may disagree on.
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from time import perf_counter

from .elim import be_mpe
from .generators import GenSpec, bit_error_rate, generate, sample_evidence
from .graph import free_ordering
from .localsearch import LSParams, dlm_solve, gls_solve, sls_solve
from .model import (
    DEFAULT_MAX_TABLE_CELLS,
    LOG_ZERO,
    Network,
    ResourceLimitError,
    evaluate,
)
from .propagation import ibp_mpe, ijgp_mpe
from .search import SearchConfig, SolveResult, bbbt_solve, bbmb_solve

SOLVED_RATIO = 0.95

ALGORITHMS = ("be", "bbbt", "bbmb", "gls", "dlm", "sls", "ijgp", "ibp")


@dataclass(frozen=True)
class AlgorithmSpec:
    name: str
    i_bound: int | None = None

    @classmethod
    def parse(cls, text: str) -> "AlgorithmSpec":
        name, _, rest = text.strip().partition(":")
        if name not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {name!r}")
        i_bound = None
        if rest:
            i_bound = int(rest)
            if i_bound < 1:
                raise ValueError("i-bound must be >= 1")
        return cls(name, i_bound)

    def label(self) -> str:
        return self.name if self.i_bound is None else f"{self.name}:{self.i_bound}"


@dataclass
class ExperimentConfig:
    specs: list[GenSpec]
    algorithms: list[AlgorithmSpec]
    instances: int = 1
    evidence_count: int = 0
    time_limit: float | None = None
    seed_base: int = 0
    early_stop_opt: float | None = None
    exact_cells: int = DEFAULT_MAX_TABLE_CELLS
    jobs: int = 0  # 0: one worker per cpu

    def __post_init__(self):
        if not self.algorithms:
            raise ValueError("need at least one algorithm")
        if self.instances < 1:
            raise ValueError("need at least one instance")


@dataclass
class ResultRow:
    instance: str
    family: str
    n: int
    k: int
    c: int
    p: int
    sigma: float
    evidence: int
    algorithm: str
    i_bound: int | None
    seed: int
    elapsed: float
    nodes: int
    best_log: float
    exact_log: float | None
    opt_ratio: float | None
    solved: bool
    completed: bool
    ber: float | None
    error: str = ""
    assignment: dict[int, int] = field(default_factory=dict)
    trace: list[tuple[float, float]] = field(default_factory=list)


CSV_COLUMNS = [
    "instance", "family", "n", "k", "c", "p", "sigma", "evidence",
    "algorithm", "i_bound", "seed", "elapsed", "nodes", "best_log",
    "exact_log", "opt_ratio", "solved", "completed", "ber", "error",
]
TIMING_COLUMNS = {"elapsed"}


def opt_ratio(best_log: float, exact_log: float) -> float:
    if best_log == LOG_ZERO:
        return 0.0
    return math.exp(best_log - exact_log)


def _dispatch(alg: AlgorithmSpec, net: Network, evidence, cfg: ExperimentConfig,
              seed: int, stop_value: float | None) -> SolveResult:
    i = alg.i_bound if alg.i_bound is not None else 2
    if alg.name == "be":
        t0 = perf_counter()
        val, asg = be_mpe(net, evidence, free_ordering(net, evidence, seed=0),
                          max_cells=cfg.exact_cells)
        elapsed = perf_counter() - t0
        trace = [(elapsed, val)] if val > LOG_ZERO else []
        return SolveResult(asg, val, True, 0, elapsed, trace)
    if alg.name in ("bbbt", "bbmb"):
        sc = SearchConfig(i_bound=i, time_limit=cfg.time_limit, seed=seed,
                          max_cells=cfg.exact_cells)
        solver = bbbt_solve if alg.name == "bbbt" else bbmb_solve
        return solver(net, evidence, sc)
    if alg.name in ("gls", "dlm", "sls"):
        solver = {"gls": gls_solve, "dlm": dlm_solve, "sls": sls_solve}[alg.name]
        return solver(net, evidence, cfg.time_limit, LSParams(seed=seed),
                      stop_value=stop_value)
    if alg.name == "ijgp":
        return ijgp_mpe(net, evidence, i)
    if alg.name == "ibp":
        return ibp_mpe(net, evidence)
    raise ValueError(f"unknown algorithm {alg.name!r}")


def _instance_rows(cfg: ExperimentConfig, spec: GenSpec, index: int) -> list[ResultRow]:
    seed = cfg.seed_base + index
    gspec = replace(spec, seed=seed)
    instance = f"{gspec.family}-n{gspec.n}-k{gspec.k}-s{seed}"
    net, evidence, truth = generate(gspec)
    if cfg.evidence_count and truth is None:
        evidence = sample_evidence(net, cfg.evidence_count, seed=seed)
    exact_log = None
    exact_err = ""
    try:
        exact_log, _ = be_mpe(net, evidence, free_ordering(net, evidence, seed=0),
                              max_cells=cfg.exact_cells)
    except ResourceLimitError as exc:
        exact_err = str(exc)
    stop_value = None
    if exact_log is not None and cfg.early_stop_opt is not None:
        stop_value = exact_log + math.log(cfg.early_stop_opt)
    rows = []
    for alg in cfg.algorithms:
        row = ResultRow(
            instance=instance, family=gspec.family, n=net.n, k=gspec.k,
            c=gspec.c, p=gspec.p, sigma=gspec.sigma,
            evidence=len(evidence), algorithm=alg.label(),
            i_bound=alg.i_bound, seed=seed, elapsed=0.0, nodes=0,
            best_log=LOG_ZERO, exact_log=exact_log, opt_ratio=None,
            solved=False, completed=False, ber=None, error=exact_err,
        )
        try:
            res = _dispatch(alg, net, evidence, cfg, seed, stop_value)
        except ResourceLimitError as exc:
            row.error = str(exc)
            rows.append(row)
            continue
        row.elapsed = res.elapsed
        row.nodes = res.nodes_expanded
        row.best_log = res.best_log_value
        row.completed = res.completed
        row.assignment = dict(res.best_assignment)
        row.trace = list(res.anytime_trace)
        if exact_log is not None:
            row.opt_ratio = opt_ratio(res.best_log_value, exact_log)
            row.solved = row.opt_ratio >= SOLVED_RATIO
        if truth is not None and res.best_assignment:
            row.ber = bit_error_rate(res.best_assignment, truth)
        rows.append(row)
    return rows


def run_experiment(cfg: ExperimentConfig) -> list[ResultRow]:
    """One row per (instance, algorithm), in deterministic order; resource
    errors are recorded in rows rather than raised."""
    tasks = [(spec, j) for spec in cfg.specs for j in range(cfg.instances)]
    jobs = cfg.jobs if cfg.jobs > 0 else (os.cpu_count() or 1)
    rows: list[ResultRow] = []
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_instance_rows, cfg, spec, j)
                       for spec, j in tasks]
            for fut in futures:
                rows.extend(fut.result())
    else:
        for spec, j in tasks:
            rows.extend(_instance_rows(cfg, spec, j))
    return rows


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def sidecar_path(csv_path: str) -> str:
    return csv_path + ".jsonl"


def write_results(rows: list[ResultRow], path: str) -> None:
    """CSV with the fixed column order plus a JSONL sidecar holding each
    row's assignment and anytime trace."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_cell(getattr(row, col)) for col in CSV_COLUMNS])
    with open(sidecar_path(path), "w") as fh:
        for row in rows:
            fh.write(json.dumps({
                "instance": row.instance,
                "algorithm": row.algorithm,
                "assignment": {str(v): x for v, x in sorted(row.assignment.items())},
                "trace": [[t, v] for t, v in row.trace],
            }) + "\n")


def read_results(path: str) -> list[ResultRow]:
    rows: list[ResultRow] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            rows.append(ResultRow(
                instance=rec["instance"], family=rec["family"],
                n=int(rec["n"]), k=int(rec["k"]), c=int(rec["c"]),
                p=int(rec["p"]), sigma=float(rec["sigma"]),
                evidence=int(rec["evidence"]), algorithm=rec["algorithm"],
                i_bound=int(rec["i_bound"]) if rec["i_bound"] else None,
                seed=int(rec["seed"]), elapsed=float(rec["elapsed"]),
                nodes=int(rec["nodes"]), best_log=float(rec["best_log"]),
                exact_log=float(rec["exact_log"]) if rec["exact_log"] else None,
                opt_ratio=float(rec["opt_ratio"]) if rec["opt_ratio"] else None,
                solved=rec["solved"] == "1", completed=rec["completed"] == "1",
                ber=float(rec["ber"]) if rec["ber"] else None,
                error=rec["error"],
            ))
    side = sidecar_path(path)
    if os.path.exists(side):
        with open(side) as fh:
            extras = [json.loads(line) for line in fh if line.strip()]
        for row, extra in zip(rows, extras):
            if (extra["instance"], extra["algorithm"]) == (row.instance, row.algorithm):
                row.assignment = {int(v): x for v, x in extra["assignment"].items()}
                row.trace = [(t, v) for t, v in extra["trace"]]
    return rows


def solved_fraction(rows: list[ResultRow], algorithm: str, t: float) -> float:
    """Fraction of the algorithm's rows whose run reached opt >= 0.95 by
    time t: completion time for completed systematic runs, first adequate
    trace entry otherwise."""
    mine = [r for r in rows if r.algorithm == algorithm]
    if not mine:
        return 0.0
    solved = 0
    for r in mine:
        if r.exact_log is None:
            continue
        threshold = r.exact_log + math.log(SOLVED_RATIO)
        if r.completed and r.best_log >= threshold - 1e-12:
            if r.elapsed <= t:
                solved += 1
        else:
            if any(ts <= t and val >= threshold - 1e-12 for ts, val in r.trace):
                solved += 1
    return solved / len(mine)
