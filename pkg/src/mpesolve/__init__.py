"""Solvers and benchmark tooling for most probable explanation queries."""

from .elim import (
    CompiledHeuristic,
    be_mpe,
    cte_singletons,
    mbe_compile,
    mbte,
    partition_minibuckets,
)
from .generators import (
    CodingTruth,
    GenSpec,
    bit_error_rate,
    gen_coding,
    gen_grid,
    gen_noisyor,
    gen_uniform,
    generate,
    sample_evidence,
)
from .graph import (
    Ordering,
    TreeDecomposition,
    UndirectedGraph,
    build_bucket_tree,
    free_ordering,
    min_fill_ordering,
    moralize,
    scope_graph,
)
from .harness import (
    ALGORITHMS,
    SOLVED_RATIO,
    AlgorithmSpec,
    ExperimentConfig,
    ResultRow,
    opt_ratio,
    read_results,
    run_experiment,
    solved_fraction,
    write_results,
)
from .localsearch import (
    FeatureTable,
    LSParams,
    dlm_solve,
    gls_solve,
    ls_cost,
    sls_solve,
)
from .model import (
    LOG_ZERO,
    Assignment,
    Evidence,
    Factor,
    Network,
    ResourceLimitError,
    Variable,
    condition,
    evaluate,
    log_table,
    max_eliminate,
    multiply,
    restrict,
)
from .propagation import JoinGraph, build_join_graph, ibp_mpe, ijgp_mpe
from .search import SearchConfig, SolveResult, bbbt_solve, bbmb_solve, count_nodes
from .uai import ParseError, read_evidence, read_network, write_evidence, write_network

__all__ = [
    "LOG_ZERO",
    "ALGORITHMS",
    "SOLVED_RATIO",
    "AlgorithmSpec",
    "Assignment",
    "CodingTruth",
    "CompiledHeuristic",
    "Evidence",
    "ExperimentConfig",
    "Factor",
    "FeatureTable",
    "GenSpec",
    "JoinGraph",
    "LSParams",
    "Network",
    "Ordering",
    "ParseError",
    "ResourceLimitError",
    "ResultRow",
    "SearchConfig",
    "SolveResult",
    "TreeDecomposition",
    "UndirectedGraph",
    "Variable",
    "bbbt_solve",
    "bbmb_solve",
    "be_mpe",
    "bit_error_rate",
    "build_bucket_tree",
    "build_join_graph",
    "condition",
    "count_nodes",
    "cte_singletons",
    "dlm_solve",
    "evaluate",
    "free_ordering",
    "gen_coding",
    "gen_grid",
    "gen_noisyor",
    "gen_uniform",
    "generate",
    "gls_solve",
    "ibp_mpe",
    "ijgp_mpe",
    "log_table",
    "ls_cost",
    "max_eliminate",
    "mbe_compile",
    "mbte",
    "min_fill_ordering",
    "moralize",
    "multiply",
    "opt_ratio",
    "partition_minibuckets",
    "read_evidence",
    "read_network",
    "read_results",
    "restrict",
    "run_experiment",
    "sample_evidence",
    "scope_graph",
    "sls_solve",
    "solved_fraction",
    "write_evidence",
    "write_network",
    "write_results",
]
