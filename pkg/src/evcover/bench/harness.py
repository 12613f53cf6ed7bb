"""Batch runs of H, E1 and E2 with Table-1 style CSV output.

A cell holds ``-`` whenever its method returned no plan: budget-infeasible
heuristic runs, infeasible models, or a time limit without incumbent.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..bilevel import (CORRECTED, CUMULATIVE, LITERAL, BilevelResult, solve_e1, solve_e2,
                       solve_heuristic)
from ..instance import PlanningInstance
from ..preprocess import INCLUSIVE, preprocess

log = logging.getLogger(__name__)

METHODS = ("h", "e1", "e2")
HEADER = ("instance", "n", "NH", "AH", "cpu_h", "NE1", "AE1", "cpu_e1", "NE2", "AE2", "cpu_e2")
DASH = "-"
MASK = "*"
SOLVED_STATUSES = ("solved", "optimal")
# reference relative error of AH against AE2 for the benchmark suite
REFERENCE_RELATIVE_ERROR = 0.05


@dataclass
class BenchRow:
    """One instance's results; ``None`` marks a ``-`` cell.

    ``status`` and ``message`` are not part of the CSV and do not take part
    in equality.
    """

    instance: str
    n: int
    nh: int | None = None
    ah: float | None = None
    cpu_h: float | None = None
    ne1: int | None = None
    ae1: float | None = None
    cpu_e1: float | None = None
    ne2: int | None = None
    ae2: float | None = None
    cpu_e2: float | None = None
    status: dict = field(default_factory=dict, compare=False)
    message: dict = field(default_factory=dict, compare=False)

    def solved(self, method: str) -> bool:
        return self.status.get(method) in SOLVED_STATUSES

    def failed(self) -> bool:
        return any(s == "failed" for s in self.status.values())


def _run_method(method: str, instance, pre, time_limit: float, heuristic_mode: str,
                e2_variant: str) -> BilevelResult:
    if method == "h":
        return solve_heuristic(instance, pre, mode=heuristic_mode, time_limit=time_limit)
    if method == "e1":
        return solve_e1(instance, pre, time_limit=time_limit)
    if method == "e2":
        return solve_e2(instance, pre, variant=e2_variant, time_limit=time_limit)
    raise ValueError(f"unknown method {method!r}")


def run_instance(name: str, instance: PlanningInstance, methods=METHODS, *,
                 time_limit: float = 300.0, heuristic_mode: str = CUMULATIVE,
                 e2_variant: str = LITERAL, weights_mode: str = INCLUSIVE) -> BenchRow:
    """Run the requested methods on one instance; failures stay in their cell."""
    row = BenchRow(name, instance.n)
    pre = preprocess(instance, weights_mode)
    for method in methods:
        start = time.perf_counter()
        try:
            res = _run_method(method, instance, pre, time_limit, heuristic_mode, e2_variant)
        except Exception as exc:  # noqa: BLE001 - one cell must not sink the row
            log.exception("%s failed on %s", method, name)
            res = BilevelResult(method.upper(), "failed", message=f"{type(exc).__name__}: {exc}")
        cpu = time.perf_counter() - start
        row.status[method] = res.status
        row.message[method] = res.message
        if res.plan is not None:
            setattr(row, f"n{method}", res.plan.node_count)
            setattr(row, f"a{method}", res.plan.attractiveness)
            setattr(row, f"cpu_{method}", cpu)
    return row


def run_benchmark(instances, methods=METHODS, time_limit: float = 300.0, *,
                  heuristic_mode: str = CUMULATIVE, e2_variant: str = LITERAL,
                  weights_mode: str = INCLUSIVE, threads: int = 1) -> list[BenchRow]:
    """Run every method on every ``(name, instance)`` pair.

    Rows come back in input order whatever ``threads`` is.
    """
    methods = tuple(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    if e2_variant not in (LITERAL, CORRECTED):
        raise ValueError(f"unknown E2 variant {e2_variant!r}")
    kwargs = dict(time_limit=time_limit, heuristic_mode=heuristic_mode,
                  e2_variant=e2_variant, weights_mode=weights_mode)
    items = list(instances)
    if threads <= 1:
        return [run_instance(name, inst, methods, **kwargs) for name, inst in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(run_instance, name, inst, methods, **kwargs) for name, inst in items]
        return [f.result() for f in futures]


# -- CSV ----------------------------------------------------------------------


def _fmt_value(v: float | None) -> str:
    if v is None:
        return DASH
    if float(v).is_integer():
        return str(int(v))
    return f"{v:.6g}"


def _fmt_cpu(v: float | None, mask: bool) -> str:
    if v is None:
        return DASH
    return MASK if mask else f"{v:.2f}"


def rows_to_csv(rows, *, mask_timing: bool = False) -> str:
    """CSV text; ``mask_timing`` replaces timings with ``*`` for comparisons."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in rows:
        w.writerow([r.instance, r.n,
                    _fmt_value(r.nh), _fmt_value(r.ah), _fmt_cpu(r.cpu_h, mask_timing),
                    _fmt_value(r.ne1), _fmt_value(r.ae1), _fmt_cpu(r.cpu_e1, mask_timing),
                    _fmt_value(r.ne2), _fmt_value(r.ae2), _fmt_cpu(r.cpu_e2, mask_timing)])
    return buf.getvalue()


def _parse_cell(text: str, kind):
    if text in (DASH, MASK):
        return None
    return kind(text)


def parse_csv(text: str) -> list[BenchRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != HEADER:
        raise ValueError(f"unexpected CSV header {header!r}")
    rows = []
    for rec in reader:
        if not rec:
            continue
        if len(rec) != len(HEADER):
            raise ValueError(f"row {rec!r} has {len(rec)} cells, expected {len(HEADER)}")
        kinds = (int, float, float) * 3
        values = [_parse_cell(c, k) for c, k in zip(rec[2:], kinds)]
        rows.append(BenchRow(rec[0], int(rec[1]), *values))
    return rows


def round_cpu(rows) -> list[BenchRow]:
    """Copies of ``rows`` with timings rounded the way the CSV stores them."""
    out = []
    for r in rows:
        c = BenchRow(**{k: getattr(r, k) for k in r.__dataclass_fields__})
        for name in ("cpu_h", "cpu_e1", "cpu_e2"):
            v = getattr(c, name)
            if v is not None:
                setattr(c, name, float(f"{v:.2f}"))
        out.append(c)
    return out


# -- dominance pattern --------------------------------------------------------


@dataclass
class DominanceReport:
    eligible: list[str]
    violations: list[str]
    relative_errors: list[float]

    @property
    def holds(self) -> int:
        return len(self.eligible) - len(self.violations)

    @property
    def rate(self) -> float:
        return self.holds / len(self.eligible) if self.eligible else math.nan

    @property
    def median_relative_error(self) -> float:
        return float(np.median(self.relative_errors)) if self.relative_errors else math.nan

    def lines(self) -> list[str]:
        out = [f"dominance pattern holds on {self.holds}/{len(self.eligible)} instances "
               f"solved by all three methods ({len(self.violations)} violations)"]
        if self.violations:
            out.append("violations: " + ", ".join(self.violations))
        out.append(f"median relative error of AH vs AE2: {100 * self.median_relative_error:.2f}% "
                   f"(reference {100 * REFERENCE_RELATIVE_ERROR:.2f}%)")
        return out


def dominance_report(rows, tol: float = 1e-6) -> DominanceReport:
    """Check ``NE1 <= min(NH, NE2)`` and ``AE2 >= max(AH, AE1)`` per row.

    Rows count when all three methods solved. The relative error of AH
    against AE2 uses every row where both are present and AE2 is positive.
    """
    eligible, violations, errors = [], [], []
    for r in rows:
        if r.ah is not None and r.ae2 is not None and r.ae2 > 0:
            errors.append((r.ae2 - r.ah) / r.ae2)
        if not all(v is not None for v in (r.nh, r.ne1, r.ne2, r.ah, r.ae1, r.ae2)):
            continue
        if r.status and not all(r.solved(m) for m in METHODS):
            continue
        eligible.append(r.instance)
        if r.ne1 > min(r.nh, r.ne2) or r.ae2 < max(r.ah, r.ae1) - tol * max(1.0, abs(r.ae2)):
            violations.append(r.instance)
    return DominanceReport(eligible, violations, errors)
