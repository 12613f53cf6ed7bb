import json
import subprocess
import sys

import pytest

from evcover.bench import parse_csv
from evcover.cli import EXIT_INFEASIBLE, EXIT_OK, EXIT_USAGE, main
from evcover.instance import load_instance, parse_plan

from conftest import DATA


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_no_arguments_is_usage_error(capsys):
    code, _, err = run(capsys)
    assert code == EXIT_USAGE and "usage" in err


def test_unknown_flag_is_usage_error(capsys):
    code, _, err = run(capsys, "solve-e1", DATA / "p4.json", "--bogus")
    assert code == EXIT_USAGE and "error" in err


def test_heuristic_summary(capsys, tmp_path):
    trace = tmp_path / "trace.json"
    plan = tmp_path / "plan.json"
    code, out, _ = run(capsys, "solve-heuristic", DATA / "p4.json", "--trace", trace, "-o", plan)
    assert code == EXIT_OK
    assert out.startswith("H nodes=2 attract=60 cost=4 ")
    doc = json.loads(trace.read_text())
    assert doc["format_version"] == 1 and doc["status"] == "solved"
    assert doc["iterations"][0]["S1"] == [2, 3]
    assert parse_plan(plan.read_bytes()).open == (2, 3)


@pytest.mark.parametrize("cmd, prefix", [
    ("solve-ccp", "CCP nodes=2 "), ("solve-knapsack", "KP nodes=2 attract=60"),
    ("solve-e1", "E1 nodes=2 "), ("solve-e2", "E2 nodes=2 attract=60"),
    ("solve-oracle", "ORACLE nodes=2 attract=60"),
])
def test_solver_summaries(capsys, cmd, prefix):
    code, out, _ = run(capsys, cmd, DATA / "p4.json")
    assert code == EXIT_OK and out.startswith(prefix)


def test_knapsack_minimums(capsys):
    code, out, _ = run(capsys, "solve-knapsack", DATA / "p4.json", "--min", "4:2")
    assert code == EXIT_OK and "attract=50" in out
    code, _, err = run(capsys, "solve-knapsack", DATA / "p4.json", "--min", "4:3")
    assert code == EXIT_USAGE and "capacity" in err


def test_ccp_force(capsys):
    code, out, _ = run(capsys, "solve-ccp", DATA / "p4.json", "--force", "1")
    assert code == EXIT_OK and "nodes=3" in out


def test_not_r_dense(capsys):
    code, _, err = run(capsys, "solve-ccp", DATA / "nondense.json")
    assert code == EXIT_INFEASIBLE
    assert "not R-dense: node 7 has no neighbor within R" in err
    code, _, err = run(capsys, "solve-e1", DATA / "nondense.json")
    assert code == EXIT_INFEASIBLE and "not R-dense" in err


def test_budget_infeasible_message(capsys, tmp_path):
    doc = json.loads((DATA / "p4.json").read_text())
    doc["params"]["budget"] = 1
    path = tmp_path / "tight.json"
    path.write_text(json.dumps(doc))
    for cmd in ("solve-heuristic", "solve-e1", "solve-oracle"):
        code, _, err = run(capsys, cmd, path)
        assert code == EXIT_INFEASIBLE and "budget" in err and "R-dense" not in err


def test_bad_instance_is_usage_error(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{oops")
    assert run(capsys, "solve-e1", path)[0] == EXIT_USAGE
    assert run(capsys, "solve-e1", tmp_path / "missing.json")[0] == EXIT_USAGE


def test_preprocess_bundle(capsys):
    code, out, _ = run(capsys, "preprocess", DATA / "p4.json", "--weights-mode", "intermediate")
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["format_version"] == 1 and doc["r_dense"]


def test_dump_lp(capsys, tmp_path):
    lp = tmp_path / "e2.lp"
    code, _, _ = run(capsys, "solve-e2", DATA / "p4.json", "--e2-variant", "corrected",
                     "--dump-lp", lp)
    assert code == EXIT_OK and "Maximize" in lp.read_text()


def test_json_log(capsys):
    code, _, err = run(capsys, "solve-e1", DATA / "p4.json", "--log", "json", "-v")
    assert code == EXIT_OK
    records = [json.loads(line) for line in err.splitlines() if line.startswith("{")]
    assert any(r.get("method") == "E1" and r.get("nodes") == 2 for r in records)


def test_gen_is_deterministic(capsys, tmp_path):
    code, first, _ = run(capsys, "gen", "--seed", 5, "--n", 12, "--regime", "large")
    assert code == EXIT_OK
    assert run(capsys, "gen", "--seed", 5, "--n", 12, "--regime", "large")[1] == first
    code, _, _ = run(capsys, "gen", "--seed", 1, "--n", 9, "--count", 3, "--out-dir", tmp_path)
    assert code == EXIT_OK
    assert sorted(p.name for p in tmp_path.iterdir()) == [
        "small-n9-s1.json", "small-n9-s2.json", "small-n9-s3.json"]
    assert load_instance(tmp_path / "small-n9-s2.json").n == 9
    assert run(capsys, "gen", "--count", 2)[0] == EXIT_USAGE
    assert run(capsys, "gen", "--n", 1)[0] == EXIT_USAGE


def test_bench_report(capsys, tmp_path):
    report = tmp_path / "report"
    code, out, err = run(capsys, "bench", DATA / "p4.json", DATA / "nondense.json",
                         "--mask-timing", "--report-dir", report)
    assert code == EXIT_OK
    rows = parse_csv(out)
    assert [r.instance for r in rows] == ["p4", "nondense"]
    assert (rows[0].nh, rows[0].ah, rows[0].ne1, rows[0].ne2) == (2, 60, 2, 2)
    assert rows[1].nh is None and rows[1].ne1 is None
    assert out.splitlines()[1] == "p4,4,2,60,*,2,60,*,2,60,*"
    assert "dominance pattern holds on 1/1" in err
    assert (report / "results.csv").read_text() == out
    assert (report / "methods.png").read_bytes().startswith(b"\x89PNG")


def test_bench_rejects_unknown_method(capsys):
    assert run(capsys, "bench", DATA / "p4.json", "--methods", "h,zz")[0] == EXIT_USAGE
    assert run(capsys, "bench", DATA / "p4.json", "--threads", 0)[0] == EXIT_USAGE


def test_export_dot(capsys, tmp_path):
    plan = tmp_path / "plan.json"
    run(capsys, "solve-heuristic", DATA / "p4.json", "-o", plan)
    png = tmp_path / "plan.png"
    code, out, _ = run(capsys, "export-dot", DATA / "p4.json", "--plan", plan, "--png", png)
    assert code == EXIT_OK
    assert out.startswith("graph plan {")
    assert out.count("selected=true") == 2
    assert png.read_bytes().startswith(b"\x89PNG")
    assert run(capsys, "export-dot", DATA / "p4.json", "--png", png)[0] == EXIT_USAGE


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "evcover.cli", "solve-heuristic",
                           str(DATA / "p4.json")], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("H nodes=2 attract=60")
