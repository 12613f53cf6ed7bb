"""Instance generator, batch runner and reporting."""

from .generator import PRESET_SIZES, REGIMES, TOPOLOGIES, GeneratorConfig, generate_instance, table_suite
from .graphics import export_plan_graphics, plot_benchmark, plot_plan
from .harness import (DASH, HEADER, METHODS, REFERENCE_RELATIVE_ERROR, BenchRow, DominanceReport,
                      dominance_report, parse_csv, round_cpu, rows_to_csv, run_benchmark, run_instance)

__all__ = [
    "DASH", "HEADER", "METHODS", "PRESET_SIZES", "REFERENCE_RELATIVE_ERROR", "REGIMES",
    "TOPOLOGIES", "BenchRow", "DominanceReport", "GeneratorConfig", "dominance_report",
    "export_plan_graphics", "generate_instance", "parse_csv", "plot_benchmark", "plot_plan",
    "round_cpu", "rows_to_csv", "run_benchmark", "run_instance", "table_suite",
]
