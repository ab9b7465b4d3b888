import csv
import json
import subprocess
import sys

import pytest

from mpesolve.cli import main, parse_config
from mpesolve.harness import TIMING_COLUMNS
from mpesolve.model import evaluate
from mpesolve.uai import ParseError, read_network


def test_gen_writes_readable_network(tmp_path, capsys):
    out = str(tmp_path / "net.uai")
    code = main(["gen", "--family", "uniform", "--n", "8", "--c", "6",
                 "--p", "2", "--seed", "3", "--out", out])
    assert code == 0
    assert "net.uai" in capsys.readouterr().out
    net = read_network(out)
    assert net.n == 8


def test_solve_reports_and_traces(tmp_path, capsys):
    net_path = str(tmp_path / "net.uai")
    main(["gen", "--family", "uniform", "--n", "7", "--c", "5", "--p", "2",
          "--seed", "1", "--out", net_path])
    trace_path = str(tmp_path / "run.json")
    code = main(["solve", "--net", net_path, "--alg", "be",
                 "--trace", trace_path])
    assert code == 0
    out = capsys.readouterr().out
    assert "best_log" in out and "completed 1" in out
    payload = json.loads(open(trace_path).read())
    net = read_network(net_path)
    asg = {int(v): x for v, x in payload["assignment"].items()}
    assert evaluate(net, asg) == pytest.approx(payload["best_log"], abs=1e-9)


def test_solve_with_evidence_file(tmp_path, capsys):
    net_path = str(tmp_path / "net.uai")
    main(["gen", "--family", "noisy-or", "--n", "7", "--c", "5", "--p", "2",
          "--seed", "2", "--out", net_path])
    ev_path = tmp_path / "ev.txt"
    ev_path.write_text("2\n0 1\n3 0\n")
    code = main(["solve", "--net", net_path, "--evidence", str(ev_path),
                 "--alg", "bbbt", "--i-bound", "2"])
    assert code == 0
    assert "completed 1" in capsys.readouterr().out


def test_usage_errors_exit_1(tmp_path, capsys):
    assert main(["gen", "--family", "uniform"]) == 1  # missing --out
    assert main(["solve", "--net", "x", "--alg", "dijkstra"]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["--help"]) == 0
    capsys.readouterr()


def test_parse_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.uai"
    bad.write_text("MARKOV\n1\n2\n1\n1 0\n2\n0.5 0.5\n")
    assert main(["solve", "--net", str(bad), "--alg", "be"]) == 2
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("spec = family:uniform, n:radish\nalg = be\n")
    assert main(["bench", "--config", str(cfg), "--out",
                 str(tmp_path / "o.csv")]) == 2
    err = capsys.readouterr().err
    assert "bad value" in err


def test_resource_cap_exit_3(tmp_path, capsys):
    net_path = str(tmp_path / "net.uai")
    main(["gen", "--family", "uniform", "--n", "10", "--c", "8", "--p", "2",
          "--seed", "0", "--out", net_path])
    code = main(["solve", "--net", net_path, "--alg", "be",
                 "--max-cells", "2"])
    assert code == 3
    assert "resource limit" in capsys.readouterr().err


def test_config_parsing_full():
    cfg = parse_config(
        """
        # two families, three algorithms
        spec = family:uniform, n:10, k:2, c:8, p:2
        spec = family:coding, k:4, p:2, sigma:0.4
        alg = be
        alg = bbbt:3
        alg = sls
        instances = 4
        evidence = 2
        time_limit = 1.5
        seed_base = 7
        early_stop_opt = 0.95
        jobs = 1
        """
    )
    assert len(cfg.specs) == 2 and cfg.specs[1].family == "coding"
    assert [a.label() for a in cfg.algorithms] == ["be", "bbbt:3", "sls"]
    assert cfg.instances == 4 and cfg.evidence_count == 2
    assert cfg.time_limit == 1.5 and cfg.seed_base == 7
    assert cfg.early_stop_opt == 0.95


@pytest.mark.parametrize("text,fragment", [
    ("alg = be\n", "need at least one spec"),
    ("spec = family:uniform\nwat = 1\nalg = be\n", "unknown config key"),
    ("spec = family:uniform\nalg = quantum\n", "unknown algorithm"),
    ("spec = family:uniform, w:3\nalg = be\n", "unknown spec field"),
    ("spec = family:uniform\ninstances = 0\nalg = be\n", "instance"),
    ("spec family:uniform\n", "key = value"),
])
def test_config_rejections(text, fragment):
    with pytest.raises(ParseError, match=fragment):
        parse_config(text)


def _bench(tmp_path, name):
    cfg = tmp_path / "bench.cfg"
    cfg.write_text(
        "spec = family:uniform, n:8, k:2, c:6, p:2\n"
        "alg = be\nalg = bbmb:2\n"
        "instances = 3\nevidence = 1\ntime_limit = 5\njobs = 1\n"
    )
    out = str(tmp_path / name)
    assert main(["bench", "--config", str(cfg), "--out", out]) == 0
    return out


def test_bench_and_stats(tmp_path, capsys):
    out = _bench(tmp_path, "a.csv")
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 7  # header + 3 instances x 2 algorithms
    assert main(["stats", "--in", out, "--at-time", "60"]) == 0
    text = capsys.readouterr().out
    assert "be rows=3" in text and "bbmb:2 rows=3" in text
    assert "solved_fraction=1.0000" in text


def test_bench_twice_identical_modulo_timing(tmp_path):
    out_a = _bench(tmp_path, "a.csv")
    out_b = _bench(tmp_path, "b.csv")

    def stripped(path):
        with open(path) as fh:
            rows = list(csv.reader(fh))
        header = rows[0]
        drop = [header.index(c) for c in TIMING_COLUMNS]
        return [
            [cell for i, cell in enumerate(row) if i not in drop]
            for row in rows
        ]

    assert stripped(out_a) == stripped(out_b)


def test_console_entry_point(tmp_path):
    out = str(tmp_path / "n.uai")
    proc = subprocess.run(
        [sys.executable, "-m", "mpesolve.cli", "gen", "--family", "grid",
         "--n", "9", "--out", out],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert read_network(out).n == 9
