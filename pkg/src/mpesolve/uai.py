"""Plain-text model and evidence files.

Networks use the UAI BAYES layout: header token, variable count, domain
sizes, function count, one scope line per function (parents first, child
last), then each function's table as a cell count followed by that many
probabilities in row-major order with the last scope variable varying
fastest. The first n functions are the CPTs of variables 0..n-1 in order;
any further functions must be single-variable and are read back as unary
attachments (channel likelihoods and the like).

Evidence files hold a pair count followed by variable/value pairs.
"""
from __future__ import annotations

import numpy as np

from .model import Evidence, Factor, Network, log_table


class ParseError(Exception):
    """Malformed input file; message carries path and line number."""


class _Tokens:
    def __init__(self, path: str, text: str):
        self.path = path
        self.items: list[tuple[str, int]] = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            body = line.split("#", 1)[0]
            for tok in body.split():
                self.items.append((tok, lineno))
        self.pos = 0
        self.last_line = 1

    def error(self, msg: str) -> ParseError:
        return ParseError(f"{self.path}:{self.last_line}: {msg}")

    def next(self, what: str) -> str:
        if self.pos >= len(self.items):
            raise self.error(f"unexpected end of file, expected {what}")
        tok, line = self.items[self.pos]
        self.pos += 1
        self.last_line = line
        return tok

    def next_int(self, what: str) -> int:
        tok = self.next(what)
        try:
            return int(tok)
        except ValueError:
            raise self.error(f"expected {what}, got {tok!r}") from None

    def next_float(self, what: str) -> float:
        tok = self.next(what)
        try:
            return float(tok)
        except ValueError:
            raise self.error(f"expected {what}, got {tok!r}") from None

    def done(self) -> bool:
        return self.pos >= len(self.items)


def write_network(net: Network, path: str) -> None:
    funcs = list(net.cpts) + list(net.unaries)
    lines = ["BAYES", str(net.n), " ".join(map(str, net.domain_sizes)),
             str(len(funcs))]
    for f in funcs:
        lines.append(" ".join([str(len(f.scope))] + [str(v) for v in f.scope]))
    lines.append("")
    for f in funcs:
        table = np.exp(f.values).ravel()
        lines.append(str(table.size))
        lines.append(" ".join(f"{x:.17g}" for x in table))
        lines.append("")
    with open(path, "w") as fh:
        fh.write("\n".join(lines))


def read_network(path: str) -> Network:
    with open(path) as fh:
        toks = _Tokens(path, fh.read())
    header = toks.next("header")
    if header.upper() != "BAYES":
        raise toks.error(f"expected BAYES header, got {header!r}")
    n = toks.next_int("variable count")
    if n < 1:
        raise toks.error("variable count must be positive")
    dims = [toks.next_int("domain size") for _ in range(n)]
    if any(k < 1 for k in dims):
        raise toks.error("domain sizes must be positive")
    m = toks.next_int("function count")
    if m < n:
        raise toks.error(f"need at least {n} functions, got {m}")
    scopes: list[tuple[int, ...]] = []
    for j in range(m):
        size = toks.next_int("scope size")
        scope = tuple(toks.next_int("scope variable") for _ in range(size))
        if any(not 0 <= v < n for v in scope):
            raise toks.error(f"scope variable out of range in function {j}")
        if j < n:
            if not scope or scope[-1] != j:
                raise toks.error(
                    f"function {j} must be the CPT of variable {j} (child last)"
                )
        elif len(scope) != 1:
            raise toks.error(
                f"extra function {j} must be single-variable, got scope {scope}"
            )
        scopes.append(scope)
    tables = []
    for j, scope in enumerate(scopes):
        count = toks.next_int("table size")
        want = 1
        for v in scope:
            want *= dims[v]
        if count != want:
            raise toks.error(
                f"function {j}: table size {count}, scope implies {want}"
            )
        vals = np.array(
            [toks.next_float("table entry") for _ in range(count)]
        ).reshape([dims[v] for v in scope])
        if (vals < 0).any():
            raise toks.error(f"function {j}: negative probability")
        tables.append(Factor(scope, log_table(vals)))
    if not toks.done():
        raise toks.error("trailing tokens after last table")
    try:
        return Network(dims, tables[:n], tuple(tables[n:]))
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None


def write_evidence(evidence: Evidence, path: str) -> None:
    lines = [str(len(evidence))]
    for v in sorted(evidence):
        lines.append(f"{v} {evidence[v]}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_evidence(path: str, net: Network | None = None) -> Evidence:
    with open(path) as fh:
        toks = _Tokens(path, fh.read())
    if toks.done():
        return {}
    count = toks.next_int("evidence count")
    evidence: dict[int, int] = {}
    for _ in range(count):
        v = toks.next_int("evidence variable")
        x = toks.next_int("evidence value")
        if v in evidence:
            raise toks.error(f"variable {v} assigned twice")
        if net is not None:
            if not 0 <= v < net.n:
                raise toks.error(f"variable {v} out of range")
            if not 0 <= x < net.domain_sizes[v]:
                raise toks.error(f"value {x} outside domain of variable {v}")
        evidence[v] = x
    if not toks.done():
        raise toks.error("trailing tokens after evidence pairs")
    return evidence
