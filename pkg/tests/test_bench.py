import math
import re

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evcover.bench import (HEADER, BenchRow, GeneratorConfig, dominance_report,
                           export_plan_graphics, generate_instance, parse_csv, plot_benchmark,
                           plot_plan, round_cpu, rows_to_csv, run_benchmark, run_instance,
                           table_suite)
from evcover.instance import StationPlan, serialize_instance
from evcover.preprocess import preprocess

from conftest import path4

# one DOT statement: attribute default, graph attribute, node or undirected edge
_ID = r'(?:[A-Za-z_][A-Za-z_0-9]*|"(?:[^"\\]|\\.)*"|-?\d+(?:\.\d+)?)'
_ATTR = rf"{_ID}\s*=\s*{_ID}"
_ALIST = rf"\[\s*(?:{_ATTR}\s*(?:,\s*{_ATTR}\s*)*)?\]"
_STMT = re.compile(rf"^\s*(?:(?:node|edge|graph)\s*{_ALIST}|{_ATTR}|{_ID}\s*(?:--\s*{_ID}\s*)?"
                   rf"(?:{_ALIST})?)\s*;\s*$")


def parse_dot(text):
    """Minimal grammar check; returns node attribute strings keyed by node id."""
    lines = text.strip().splitlines()
    assert re.fullmatch(r"(?:strict\s+)?graph\s+\w+\s*\{", lines[0])
    assert lines[-1].strip() == "}"
    nodes = {}
    for line in lines[1:-1]:
        assert _STMT.match(line), line
        m = re.match(r"\s*(n\d+)\s*\[(.*)\];", line)
        if m and "--" not in line:
            nodes[m.group(1)] = m.group(2)
    return nodes


def test_regime_names_and_validation():
    assert GeneratorConfig(3, 27, "large").name == "large-n27-s3"
    for bad in (dict(n=1), dict(regime="huge"), dict(topology="ring"), dict(budget=-1.0),
                dict(seed=-1)):
        with pytest.raises(ValueError):
            GeneratorConfig(**{"seed": 0, "n": 10, **bad})


@pytest.mark.parametrize("topology", ["grid", "random-planar"])
def test_generation_is_deterministic(topology):
    cfg = GeneratorConfig(2024, 40, "small", topology)
    assert serialize_instance(generate_instance(cfg)) == serialize_instance(generate_instance(cfg))
    other = generate_instance(GeneratorConfig(2025, 40, "small", topology))
    assert serialize_instance(other) != serialize_instance(generate_instance(cfg))


@pytest.mark.parametrize("regime", ["case", "small", "large"])
def test_regime_compliance(regime):
    for seed in range(1000):
        inst = generate_instance(GeneratorConfig(seed, 27, regime))
        w = np.asarray(inst.weights)
        p = np.asarray(inst.prices)
        q = np.asarray(inst.capacities)
        P = inst.budget
        if regime == "case":
            assert P == 20 and inst.radius == 1
            assert np.all(p == 1) and np.all(q == 5)
            assert np.all((1 <= w) & (w < 100))
            continue
        lo, hi, qmax = (1, 100, 10) if regime == "small" else (101, 1000, 20)
        assert np.all((lo <= w) & (w < hi)), seed
        assert (lo if regime == "large" else 20) <= P < hi
        assert np.all((1 <= q) & (q < qmax))
        assert np.all((1 <= p) & (p < P / 4))
        assert 1 <= inst.radius < 3


def test_budget_override():
    inst = generate_instance(GeneratorConfig(1, 300, "case", budget=120))
    assert inst.budget == 120 and inst.n == 300


@pytest.mark.parametrize("n, topology", [(27, "grid"), (57, "grid"), (27, "random-planar"),
                                         (2, "grid"), (3, "random-planar")])
def test_generated_graphs_are_connected_and_r_dense(n, topology):
    inst = generate_instance(GeneratorConfig(7, n, "case", topology))
    assert inst.network.is_connected()
    assert all(length == 1 for _, _, length in inst.network.arcs)
    assert not preprocess(inst).coverage.uncovered_nodes()


def test_table_suite_layout():
    suite = table_suite(0)
    assert len(suite) == 30
    names = [name for name, _ in suite]
    assert names[0] == "01-case-n27-s0" and names[-1] == "30-large-n57-s29"
    assert [inst.n for _, inst in suite].count(57) == 5


def test_empty_benchmark_is_header_only():
    assert rows_to_csv(run_benchmark([])) == ",".join(HEADER) + "\n"


def test_p4_row(p4):
    row = run_instance("p4", p4)
    assert (row.nh, row.ah, row.ne1, row.ne2) == (2, 60, 2, 2)
    assert row.ae2 >= 60 and not row.failed()
    line = rows_to_csv([row], mask_timing=True).splitlines()[1]
    assert line == "p4,4,2,60,*,2,60,*,2,60,*"


def test_budget_infeasible_heuristic_gets_dashes():
    # cover {2,3} costs 2 > P; E1 and E2 find nothing either, which the row shows
    row = run_instance("tight", path4(budget=1))
    assert row.status["h"] == "infeasible_budget"
    assert rows_to_csv([row]).splitlines()[1].startswith("tight,4,-,-,-,")


def test_dashes_with_exact_cells_populated():
    # the heuristic's first cover is over budget; the exact models still find plans
    inst = generate_instance(GeneratorConfig(19, 27, "large"))
    row = run_instance("large-n27-s19", inst)
    assert row.status["h"] == "infeasible_budget"
    assert (row.nh, row.ah, row.cpu_h) == (None, None, None)
    assert row.ne1 == 9 and row.ne2 == 10
    cells = rows_to_csv([row]).splitlines()[1].split(",")
    assert cells[2:5] == ["-", "-", "-"] and "-" not in cells[5:]


def test_unknown_method_rejected(p4):
    with pytest.raises(ValueError):
        run_benchmark([("p4", p4)], methods=("h", "x"))


def test_failed_cell_does_not_abort_row(monkeypatch, p4):
    import evcover.bench.harness as harness

    def boom(*args, **kwargs):
        raise RuntimeError("solver exploded")

    monkeypatch.setattr(harness, "solve_e1", boom)
    row = run_instance("p4", p4)
    assert row.status["e1"] == "failed" and "exploded" in row.message["e1"]
    assert row.failed()
    assert row.nh == 2 and row.ne2 == 2 and row.ne1 is None


def test_threads_keep_order(p4):
    items = [(f"i{k}", generate_instance(GeneratorConfig(k, 12, "small"))) for k in range(4)]
    items.insert(2, ("p4", p4))
    one = run_benchmark(items, methods=("h", "e2"))
    many = run_benchmark(items, methods=("h", "e2"), threads=3)
    assert rows_to_csv(one, mask_timing=True) == rows_to_csv(many, mask_timing=True)
    assert [r.instance for r in many] == [name for name, _ in items]


cells = st.one_of(st.none(), st.integers(0, 500))
values = st.one_of(st.none(), st.integers(0, 10**6).map(float),
                   st.floats(0, 1e6, allow_nan=False).map(lambda v: float(f"{v:.6g}")))
cpus = st.one_of(st.none(), st.floats(0, 1e4, allow_nan=False))


@settings(max_examples=100, deadline=None)
@given(rows=st.lists(st.builds(BenchRow, st.from_regex(r"[a-z0-9\-]{1,12}", fullmatch=True),
                               st.integers(2, 400), cells, values, cpus, cells, values, cpus,
                               cells, values, cpus), max_size=6))
def test_csv_round_trip(rows):
    text = rows_to_csv(rows)
    assert parse_csv(text) == round_cpu(rows)
    assert rows_to_csv(parse_csv(text)) == text


def test_parse_csv_rejects_bad_header():
    with pytest.raises(ValueError):
        parse_csv("a,b\n1,2\n")


def test_dominance_report():
    good = BenchRow("a", 5, 3, 50, 0.1, 2, 40, 0.1, 4, 60, 0.1, {m: "optimal" for m in "h e1 e2".split()})
    bad = BenchRow("b", 5, 3, 70, 0.1, 4, 40, 0.1, 4, 60, 0.1, {m: "optimal" for m in "h e1 e2".split()})
    partial = BenchRow("c", 5, None, None, None, 2, 40, 0.1, 4, 60, 0.1)
    rep = dominance_report([good, bad, partial])
    assert rep.eligible == ["a", "b"] and rep.violations == ["b"]
    assert rep.rate == 0.5
    assert rep.median_relative_error == pytest.approx(((60 - 50) / 60 + (60 - 70) / 60) / 2)
    text = "\n".join(rep.lines())
    assert "1/2" in text and "5.00%" in text
    assert math.isnan(dominance_report([]).rate)


def test_dot_export_p4(p4_doc):
    plan = StationPlan("H", (2, 3), {2: 2, 3: 2}, 60.0, 4.0)
    text = export_plan_graphics(p4_doc, plan)
    nodes = parse_dot(text)
    selected = {k for k, attrs in nodes.items() if "selected=true" in attrs}
    assert selected == {"n2", "n3"}
    assert 'label="2\\nx=2"' in nodes["n2"]
    assert text.count("--") == 3


def test_dot_export_empty_plan(p4_doc):
    nodes = parse_dot(export_plan_graphics(p4_doc, StationPlan("H", ())))
    assert len(nodes) == 4 and not any("selected" in a for a in nodes.values())
    assert "selected" not in export_plan_graphics(p4_doc)


def test_figures_written(tmp_path, p4_doc):
    plan = StationPlan("H", (2, 3), {2: 2, 3: 2}, 60.0, 4.0)
    plot_plan(p4_doc, plan, tmp_path / "plan.png")
    row = run_instance("p4", p4_doc)
    plot_benchmark([row, BenchRow("empty", 3)], tmp_path / "bench.png")
    for name in ("plan.png", "bench.png"):
        data = (tmp_path / name).read_bytes()
        assert data.startswith(b"\x89PNG") and len(data) > 1000
