"""Command-line entry point ``evcover``.

Exit codes: 0 success, 1 usage error, 2 solve failure, 3 infeasible model.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bench import (METHODS, REGIMES, TOPOLOGIES, GeneratorConfig, dominance_report,
                    export_plan_graphics, generate_instance, plot_benchmark, plot_plan, rows_to_csv,
                    run_benchmark, table_suite)
from .bilevel import (CORRECTED, CUMULATIVE, INFEASIBLE, INFEASIBLE_BUDGET, INFEASIBLE_CAPACITY,
                      LITERAL, NOT_R_DENSE, OPTIMAL, SINGLE, SIZE_LIMIT, SOLVED, bilevel_oracle,
                      solve_e1, solve_e2, solve_heuristic)
from .bilevel.e1 import build_e1
from .bilevel.e2 import build_e2
from .ccp import request_for, solve_ccp
from .instance import (InstanceError, InstanceSyntaxError, StationPlan, load_instance, parse_plan,
                       serialize_instance, serialize_plan)
from .knapsack import KnapsackInfeasible, KnapsackRequest, solve_knapsack
from .mip import Tolerances
from .preprocess import INCLUSIVE, WEIGHT_MODES, NotRDenseError, bundle_to_json, preprocess

EXIT_OK, EXIT_USAGE, EXIT_FAILED, EXIT_INFEASIBLE = 0, 1, 2, 3

log = logging.getLogger("evcover")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class _JsonFormatter(logging.Formatter):
    def format(self, record):
        doc = {"time": round(record.created, 3), "level": record.levelname.lower(),
               "logger": record.name, "message": record.getMessage()}
        doc.update(getattr(record, "fields", {}))
        return json.dumps(doc)


def _setup_logging(kind: str, verbose: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    if kind == "json":
        handler.setFormatter(_JsonFormatter())
    else:
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("evcover")
    root.handlers[:] = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.INFO if kind == "json" else logging.WARNING)
    root.propagate = False


def _ids(text: str | None) -> list[int]:
    if not text:
        return []
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated node ids, got {text!r}") from None


def _min_counts(text: str | None) -> dict[int, int]:
    """Parse ``id`` or ``id:count`` items; a bare id means one unit."""
    out = {}
    for item in (text or "").split(","):
        item = item.strip()
        if not item:
            continue
        node, _, count = item.partition(":")
        try:
            out[int(node)] = int(count) if count else 1
        except ValueError:
            raise UsageError(f"bad --min item {item!r}") from None
    return out


def _internal(instance, ids) -> list[int]:
    try:
        return [instance.index_of(i) for i in ids]
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None


def _summary(plan: StationPlan, seconds: float) -> str:
    return (f"{plan.method} nodes={plan.node_count} attract={plan.attractiveness:g} "
            f"cost={plan.cost:g} time={seconds:.2f}s")


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _emit_plan(args, plan: StationPlan, seconds: float, extra: dict | None = None) -> int:
    if args.out:
        _write(args.out, serialize_plan(plan))
    print(_summary(plan, seconds))
    log.info("solved", extra={"fields": {"method": plan.method, "nodes": plan.node_count,
                                         "attractiveness": plan.attractiveness,
                                         "cost": plan.cost, "seconds": round(seconds, 4),
                                         **(extra or {})}})
    return EXIT_OK


def _tol(args) -> Tolerances:
    return Tolerances(args.feas_tol, args.int_tol, args.gap_tol)


def _dump_lp(args, model) -> None:
    if getattr(args, "dump_lp", None):
        Path(args.dump_lp).write_text(model.to_lp_text())


def _load(args):
    instance = load_instance(args.instance)
    return instance, preprocess(instance, args.weights_mode)


# -- subcommands --------------------------------------------------------------


def cmd_preprocess(args) -> int:
    instance, pre = _load(args)
    _write(args.out, bundle_to_json(instance, pre, args.weights_mode))
    return EXIT_OK


def cmd_solve_ccp(args) -> int:
    instance, pre = _load(args)
    pre.require_r_dense(instance)
    forced = set(instance.forced_sites) | set(_internal(instance, _ids(args.force)))
    start = time.perf_counter()
    plan = solve_ccp(request_for(instance, pre.coverage, forced), time_limit=args.time_limit,
                     tol=_tol(args))
    return _emit_plan(args, plan, time.perf_counter() - start)


def cmd_solve_knapsack(args) -> int:
    instance, pre = _load(args)
    lb = np.zeros(instance.n, dtype=int)
    q = np.asarray(instance.capacities)
    for node_id, c in _min_counts(args.min).items():
        k = _internal(instance, [node_id])[0]
        if c > q[k]:
            raise UsageError(f"--min {node_id}:{c} exceeds capacity {q[k]}")
        lb[k] = c
    start = time.perf_counter()
    req = KnapsackRequest(pre.weights, np.asarray(instance.prices, float), q, instance.budget, lb)
    plan = solve_knapsack(req, instance.node_ids)
    return _emit_plan(args, plan, time.perf_counter() - start)


def _bilevel_exit(args, res, start) -> int:
    if res.plan is not None:
        code = _emit_plan(args, res.plan, time.perf_counter() - start, {"status": res.status})
        if res.status not in (SOLVED, OPTIMAL):
            print(f"warning: {res.status}; plan is the best one found", file=sys.stderr)
        return code
    if res.status in (NOT_R_DENSE, INFEASIBLE, INFEASIBLE_BUDGET, INFEASIBLE_CAPACITY):
        reason = res.message or res.status
        if res.status in (INFEASIBLE, INFEASIBLE_BUDGET) and "budget" not in reason:
            reason = f"budget: {reason}"
        print(f"infeasible ({res.status}): {reason}", file=sys.stderr)
        return EXIT_INFEASIBLE
    print(f"solve failed ({res.status}): {res.message}", file=sys.stderr)
    return EXIT_FAILED


def cmd_solve_heuristic(args) -> int:
    instance, pre = _load(args)
    start = time.perf_counter()
    res = solve_heuristic(instance, pre, mode=args.heuristic_mode, time_limit=args.time_limit)
    trace = res.solver_stats.get("trace")
    if args.trace and trace is not None:
        _write(args.trace, json.dumps(trace.to_dict(), indent=1) + "\n")
    return _bilevel_exit(args, res, start)


def cmd_solve_e1(args) -> int:
    instance, pre = _load(args)
    start = time.perf_counter()
    if not pre.coverage.uncovered_nodes():
        _dump_lp(args, build_e1(instance, pre))
    res = solve_e1(instance, pre, time_limit=args.time_limit, tol=_tol(args))
    return _bilevel_exit(args, res, start)


def cmd_solve_e2(args) -> int:
    instance, pre = _load(args)
    start = time.perf_counter()
    if not pre.coverage.uncovered_nodes():
        _dump_lp(args, build_e2(instance, pre, variant=args.e2_variant))
    res = solve_e2(instance, pre, variant=args.e2_variant, time_limit=args.time_limit,
                   tol=_tol(args))
    return _bilevel_exit(args, res, start)


def cmd_solve_oracle(args) -> int:
    instance, pre = _load(args)
    if instance.n > SIZE_LIMIT:
        raise UsageError(f"the oracle handles at most {SIZE_LIMIT} nodes, instance has {instance.n}")
    start = time.perf_counter()
    return _bilevel_exit(args, bilevel_oracle(instance, pre), start)


def cmd_gen(args) -> int:
    if args.count < 1:
        raise UsageError("--count must be at least 1")
    if args.count > 1 and not args.out_dir:
        raise UsageError("--count > 1 needs --out-dir")
    for i in range(args.count):
        try:
            cfg = GeneratorConfig(seed=args.seed + i, n=args.n, regime=args.regime,
                                  topology=args.topology, degree=args.degree, budget=args.budget)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        text = serialize_instance(generate_instance(cfg))
        if args.out_dir:
            out = Path(args.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / f"{cfg.name}.json").write_text(text)
        else:
            sys.stdout.write(text)
    return EXIT_OK


def cmd_bench(args) -> int:
    methods = tuple(m.strip().lower() for m in args.methods.split(",") if m.strip())
    unknown = [m for m in methods if m not in METHODS]
    if unknown or not methods:
        raise UsageError(f"--methods takes a comma-separated subset of {','.join(METHODS)}")
    if args.threads < 1:
        raise UsageError("--threads must be at least 1")
    if args.instances:
        items = [(Path(p).stem, load_instance(p)) for p in args.instances]
    else:
        items = table_suite(args.seed)
    rows = run_benchmark(items, methods, args.time_limit, heuristic_mode=args.heuristic_mode,
                         e2_variant=args.e2_variant, weights_mode=args.weights_mode,
                         threads=args.threads)
    _write(args.out, rows_to_csv(rows, mask_timing=args.mask_timing))
    if args.report_dir:
        report = Path(args.report_dir)
        report.mkdir(parents=True, exist_ok=True)
        (report / "results.csv").write_text(rows_to_csv(rows, mask_timing=args.mask_timing))
        plot_benchmark(rows, report / "methods.png")
    if set(methods) == {"h", "e1", "e2"}:
        for line in dominance_report(rows).lines():
            print(line, file=sys.stderr)
    for r in rows:
        for m, msg in r.message.items():
            if r.status.get(m) == "failed":
                print(f"{r.instance} {m}: {msg}", file=sys.stderr)
    return EXIT_FAILED if any(r.failed() for r in rows) else EXIT_OK


def cmd_export_dot(args) -> int:
    instance = load_instance(args.instance)
    plan = parse_plan(Path(args.plan).read_bytes()) if args.plan else None
    _write(args.out, export_plan_graphics(instance, plan))
    if args.png:
        if plan is None:
            raise UsageError("--png needs --plan")
        plot_plan(instance, plan, args.png)
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def _time_limit(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("time limit must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--weights-mode", choices=WEIGHT_MODES, default=INCLUSIVE,
                        help="which path nodes collect demand (default: %(default)s)")
    common.add_argument("--time-limit", type=_time_limit, default=math.inf, metavar="SEC")
    common.add_argument("--feas-tol", type=float, default=Tolerances.feasibility,
                        help="LP feasibility tolerance (default: %(default)g)")
    common.add_argument("--int-tol", type=float, default=Tolerances.integrality,
                        help="integrality tolerance (default: %(default)g)")
    common.add_argument("--gap-tol", type=float, default=Tolerances.relative_gap,
                        help="relative optimality gap (default: %(default)g)")
    common.add_argument("--log", choices=("text", "json"), default="text")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="evcover", description="Reinforced-coverage EV charging station planning.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    def solver(name, func, help_text):
        s = sub.add_parser(name, parents=[common], help=help_text)
        s.add_argument("instance")
        s.add_argument("-o", "--out", help="write the plan document here")
        s.set_defaults(func=func)
        return s

    s = sub.add_parser("preprocess", parents=[common], help="distances, weights and coverage")
    s.add_argument("instance")
    s.add_argument("-o", "--out")
    s.set_defaults(func=cmd_preprocess)

    s = solver("solve-ccp", cmd_solve_ccp, "minimum conditional cover")
    s.add_argument("--force", metavar="IDS", help="comma-separated sites that must open")
    s = solver("solve-knapsack", cmd_solve_knapsack, "bounded knapsack over all sites")
    s.add_argument("--min", metavar="ID[:N],...", help="minimum units per site (default 1)")
    s = solver("solve-heuristic", cmd_solve_heuristic, "alternating heuristic H")
    s.add_argument("--trace", metavar="PATH", help="write the iteration trace as JSON")
    s.add_argument("--heuristic-mode", choices=(CUMULATIVE, SINGLE), default=CUMULATIVE)
    s = solver("solve-e1", cmd_solve_e1, "single-level model E1 (fewest sites)")
    s.add_argument("--dump-lp", metavar="PATH", help="also write the model in LP text format")
    s = solver("solve-e2", cmd_solve_e2, "single-level model E2 (most attractiveness)")
    s.add_argument("--e2-variant", choices=(LITERAL, CORRECTED), default=LITERAL)
    s.add_argument("--dump-lp", metavar="PATH", help="also write the model in LP text format")
    solver("solve-oracle", cmd_solve_oracle, f"brute-force bilevel solve (n <= {SIZE_LIMIT})")

    s = sub.add_parser("gen", parents=[common], help="generate random instances")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n", type=int, default=27)
    s.add_argument("--regime", choices=REGIMES, default="small")
    s.add_argument("--topology", choices=TOPOLOGIES, default="grid")
    s.add_argument("--degree", type=float, default=3.5)
    s.add_argument("--budget", type=float, default=None, help="override the sampled budget")
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("bench", parents=[common], help="run methods over instances")
    s.add_argument("instances", nargs="*", help="instance files (default: the seeded table suite)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--methods", default="h,e1,e2")
    s.add_argument("--heuristic-mode", choices=(CUMULATIVE, SINGLE), default=CUMULATIVE)
    s.add_argument("--e2-variant", choices=(LITERAL, CORRECTED), default=LITERAL)
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--mask-timing", action="store_true", help="print * instead of timings")
    s.add_argument("--out", help="CSV path (default: stdout)")
    s.add_argument("--report-dir", help="write results.csv and figures here")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("export-dot", parents=[common], help="DOT rendering of an instance/plan")
    s.add_argument("instance")
    s.add_argument("--plan")
    s.add_argument("-o", "--out")
    s.add_argument("--png", help="also draw the plan with matplotlib")
    s.set_defaults(func=cmd_export_dot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    _setup_logging(args.log, args.verbose)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"evcover: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InstanceSyntaxError, InstanceError, OSError) as exc:
        print(f"evcover: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NotRDenseError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except KnapsackInfeasible as exc:
        print(f"infeasible: budget: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except Exception as exc:  # noqa: BLE001
        log.exception("unexpected failure")
        print(f"evcover: solve failed: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
