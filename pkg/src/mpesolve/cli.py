"""Command-line front end: gen, solve, bench, stats.

Exit codes: 0 success, 1 usage error, 2 input parse error, 3 resource cap.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

from .generators import GenSpec, generate
from .harness import (
    ALGORITHMS,
    AlgorithmSpec,
    ExperimentConfig,
    _dispatch,
    read_results,
    run_experiment,
    solved_fraction,
    write_results,
)
from .model import ResourceLimitError
from .uai import ParseError, read_evidence, read_network, write_network

_INT_FIELDS = {"n", "k", "c", "p", "seed"}
_FLOAT_FIELDS = {"p_noise", "p_leak", "sigma"}
_BOOL_FIELDS = {"grid_noisy_or"}


def _parse_genspec(text: str, where: str) -> GenSpec:
    kwargs: dict = {}
    for pair in (p.strip() for p in text.split(",") if p.strip()):
        key, sep, val = pair.partition(":")
        key, val = key.strip(), val.strip()
        if not sep:
            raise ParseError(f"{where}: expected key:value, got {pair!r}")
        try:
            if key == "family":
                kwargs[key] = val
            elif key in _INT_FIELDS:
                kwargs[key] = int(val)
            elif key in _FLOAT_FIELDS:
                kwargs[key] = float(val)
            elif key in _BOOL_FIELDS:
                kwargs[key] = val.lower() in ("1", "true", "yes")
            else:
                raise ParseError(f"{where}: unknown spec field {key!r}")
        except ValueError:
            raise ParseError(f"{where}: bad value for {key}: {val!r}") from None
    return GenSpec(**kwargs)


def parse_config(text: str, path: str = "<config>") -> ExperimentConfig:
    """Flat key = value lines; `spec` and `alg` repeat, `#` comments."""
    specs: list[GenSpec] = []
    algs: list[AlgorithmSpec] = []
    kv: dict[str, tuple[str, str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{path}:{lineno}"
        key, sep, val = line.partition("=")
        if not sep:
            raise ParseError(f"{where}: expected key = value")
        key, val = key.strip(), val.strip()
        if key == "spec":
            specs.append(_parse_genspec(val, where))
        elif key == "alg":
            try:
                algs.append(AlgorithmSpec.parse(val))
            except ValueError as exc:
                raise ParseError(f"{where}: {exc}") from None
        else:
            kv[key] = (val, where)

    def take(key, conv, default):
        if key not in kv:
            return default
        val, where = kv.pop(key)
        try:
            return conv(val)
        except ValueError:
            raise ParseError(f"{where}: bad value for {key}: {val!r}") from None

    instances = take("instances", int, 1)
    evidence = take("evidence", int, 0)
    time_limit = take(
        "time_limit", lambda v: None if v.lower() == "none" else float(v), None
    )
    seed_base = take("seed_base", int, 0)
    early = take("early_stop_opt", float, None)
    jobs = take("jobs", int, 0)
    exact_cells = take("exact_cells", int, 1 << 27)
    if kv:
        key, (_, where) = next(iter(kv.items()))
        raise ParseError(f"{where}: unknown config key {key!r}")
    if not specs:
        raise ParseError(f"{path}: need at least one spec line")
    try:
        return ExperimentConfig(
            specs=specs, algorithms=algs, instances=instances,
            evidence_count=evidence, time_limit=time_limit,
            seed_base=seed_base, early_stop_opt=early,
            exact_cells=exact_cells, jobs=jobs,
        )
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None


def _cmd_gen(args) -> int:
    spec = GenSpec(
        family=args.family, n=args.n, k=args.k, c=args.c, p=args.p,
        p_noise=args.p_noise, p_leak=args.p_leak, sigma=args.sigma,
        seed=args.seed, grid_noisy_or=args.grid_noisy_or,
    )
    net, _, _ = generate(spec)
    write_network(net, args.out)
    print(f"wrote {args.out} ({spec.family}, {net.n} variables)")
    return 0


def _cmd_solve(args) -> int:
    net = read_network(args.net)
    evidence = read_evidence(args.evidence, net) if args.evidence else {}
    alg = AlgorithmSpec(args.alg, args.i_bound)
    cfg = ExperimentConfig(
        specs=[], algorithms=[alg], time_limit=args.time_limit,
        exact_cells=args.max_cells if args.max_cells else 1 << 27,
    )
    res = _dispatch(alg, net, evidence, cfg, args.seed, None)
    print(f"best_log {res.best_log_value!r}")
    print(f"completed {1 if res.completed else 0}")
    print(f"nodes {res.nodes_expanded}")
    print(f"elapsed {res.elapsed:.3f}")
    if args.trace:
        with open(args.trace, "w") as fh:
            json.dump({
                "best_log": res.best_log_value,
                "completed": res.completed,
                "assignment": {str(v): x for v, x in
                               sorted(res.best_assignment.items())},
                "trace": [[t, v] for t, v in res.anytime_trace],
            }, fh, indent=2)
    return 0


def _cmd_bench(args) -> int:
    with open(args.config) as fh:
        cfg = parse_config(fh.read(), args.config)
    if args.jobs is not None:
        cfg.jobs = args.jobs
    rows = run_experiment(cfg)
    write_results(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_stats(args) -> int:
    rows = read_results(args.in_path)
    for alg in sorted({r.algorithm for r in rows}):
        frac = solved_fraction(rows, alg, args.at_time)
        mine = [r for r in rows if r.algorithm == alg]
        opts = [r.opt_ratio for r in mine if r.opt_ratio is not None]
        mean_opt = sum(opts) / len(opts) if opts else float("nan")
        print(f"{alg} rows={len(mine)} solved_fraction={frac:.4f} "
              f"mean_opt={mean_opt:.4f}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mpesolve",
        description="Generate, solve, and benchmark MPE instances.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a network file")
    g.add_argument("--family", required=True,
                   choices=["uniform", "noisy-or", "grid", "coding"])
    g.add_argument("--n", type=int, default=10)
    g.add_argument("--k", type=int, default=2)
    g.add_argument("--c", type=int, default=8)
    g.add_argument("--p", type=int, default=2)
    g.add_argument("--p-noise", type=float, default=0.2)
    g.add_argument("--p-leak", type=float, default=0.01)
    g.add_argument("--sigma", type=float, default=0.32)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--grid-noisy-or", action="store_true")
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_gen)

    s = sub.add_parser("solve", help="run one solver on a network file")
    s.add_argument("--net", required=True)
    s.add_argument("--evidence")
    s.add_argument("--alg", required=True, choices=list(ALGORITHMS))
    s.add_argument("--i-bound", type=int)
    s.add_argument("--time-limit", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-cells", type=int, help="table cell cap for exact solvers")
    s.add_argument("--trace", help="write assignment and anytime trace JSON")
    s.set_defaults(func=_cmd_solve)

    b = sub.add_parser("bench", help="run a config file batch to CSV")
    b.add_argument("--config", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--jobs", type=int)
    b.set_defaults(func=_cmd_bench)

    t = sub.add_parser("stats", help="summarize a results CSV")
    t.add_argument("--in", dest="in_path", required=True)
    t.add_argument("--at-time", type=float, default=math.inf)
    t.set_defaults(func=_cmd_stats)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 1
        return 0 if code == 0 else 1
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ResourceLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
