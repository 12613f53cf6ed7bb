"""Bounded-integer linear programs and their solutions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

CONTINUOUS = "continuous"
INTEGER = "integer"
BINARY = "binary"
VAR_KINDS = (CONTINUOUS, INTEGER, BINARY)
SENSES = ("<=", ">=", "=")


class ModelError(ValueError):
    """Raised when a model is structurally invalid."""


@dataclass
class Variable:
    name: str
    lb: float = 0.0
    ub: float = math.inf
    kind: str = CONTINUOUS

    @property
    def is_integer(self) -> bool:
        return self.kind != CONTINUOUS


@dataclass
class Constraint:
    coeffs: dict[int, float]
    sense: str
    rhs: float
    name: str = ""


@dataclass
class MipSolution:
    """Outcome of an LP or MIP solve.

    ``values`` is indexed like ``MipModel.variables``; it is ``None`` when
    no feasible point is known.
    """

    status: str
    values: np.ndarray | None = None
    objective_value: float = math.nan
    best_bound: float = math.nan
    node_count: int = 0
    wall_time: float = 0.0
    iterations: int = 0

    @property
    def has_solution(self) -> bool:
        return self.values is not None


@dataclass(frozen=True)
class Tolerances:
    feasibility: float = 1e-7
    integrality: float = 1e-6
    relative_gap: float = 1e-6


class MipModel:
    """A linear model over bounded continuous/integer/binary variables.

    Variables are addressed by the integer index returned from
    :meth:`add_var`.
    """

    def __init__(self, name: str = "model", sense: str = "min"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective: dict[int, float] = {}
        self.sense = sense
        self._names: dict[str, int] = {}

    # -- construction -----------------------------------------------------

    def add_var(self, name: str, lb: float = 0.0, ub: float = math.inf,
                kind: str = CONTINUOUS) -> int:
        if kind not in VAR_KINDS:
            raise ModelError(f"unknown variable kind {kind!r}")
        if name in self._names:
            raise ModelError(f"duplicate variable name {name!r}")
        if kind == BINARY:
            lb, ub = max(0.0, lb), min(1.0, ub)
        self.variables.append(Variable(name, float(lb), float(ub), kind))
        idx = len(self.variables) - 1
        self._names[name] = idx
        return idx

    def add_constraint(self, coeffs: Mapping[int, float] | Iterable[tuple[int, float]],
                       sense: str, rhs: float, name: str = "") -> int:
        if sense not in SENSES:
            raise ModelError(f"unknown constraint sense {sense!r}")
        row: dict[int, float] = {}
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        for j, a in items:
            if a != 0:
                row[j] = row.get(j, 0.0) + float(a)
        self.constraints.append(Constraint(row, sense, float(rhs), name))
        return len(self.constraints) - 1

    def set_objective(self, coeffs: Mapping[int, float], sense: str = "min") -> None:
        if sense not in ("min", "max"):
            raise ModelError(f"unknown objective sense {sense!r}")
        self.objective = {j: float(c) for j, c in coeffs.items() if c != 0}
        self.sense = sense

    def index(self, name: str) -> int:
        return self._names[name]

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    # -- checks -----------------------------------------------------------

    def validate(self) -> None:
        n = self.num_vars
        for v in self.variables:
            if v.lb > v.ub:
                raise ModelError(f"variable {v.name}: lower bound {v.lb} > upper bound {v.ub}")
            if v.is_integer and not (math.isfinite(v.lb) and math.isfinite(v.ub)):
                raise ModelError(f"integer variable {v.name} needs finite bounds")
        for i, con in enumerate(self.constraints):
            for j in con.coeffs:
                if not 0 <= j < n:
                    raise ModelError(f"constraint {con.name or i} references unknown variable {j}")
        for j in self.objective:
            if not 0 <= j < n:
                raise ModelError(f"objective references unknown variable {j}")

    def objective_value(self, values: np.ndarray) -> float:
        return float(sum(c * values[j] for j, c in self.objective.items()))

    def violations(self, values: np.ndarray, tol: float = 1e-6) -> list[str]:
        """Describe every bound, integrality or row violated by ``values``."""
        out = []
        for j, v in enumerate(self.variables):
            x = values[j]
            if x < v.lb - tol or x > v.ub + tol:
                out.append(f"{v.name}={x} outside [{v.lb}, {v.ub}]")
            if v.is_integer and abs(x - round(x)) > tol:
                out.append(f"{v.name}={x} not integral")
        for i, con in enumerate(self.constraints):
            act = sum(a * values[j] for j, a in con.coeffs.items())
            scale = max(1.0, abs(con.rhs))
            if ((con.sense == "<=" and act > con.rhs + tol * scale)
                    or (con.sense == ">=" and act < con.rhs - tol * scale)
                    or (con.sense == "=" and abs(act - con.rhs) > tol * scale)):
                out.append(f"row {con.name or i}: {act} {con.sense} {con.rhs}")
        return out

    # -- matrix form ------------------------------------------------------

    def matrix_form(self):
        """Return ``(A, row_lo, row_hi, c, lb, ub, integer_mask)``.

        ``c`` is always a minimization objective; maximization models are
        negated.
        """
        n, m = self.num_vars, self.num_constraints
        rows, cols, vals = [], [], []
        lo = np.full(m, -np.inf)
        hi = np.full(m, np.inf)
        for i, con in enumerate(self.constraints):
            for j, a in con.coeffs.items():
                rows.append(i)
                cols.append(j)
                vals.append(a)
            if con.sense in ("<=", "="):
                hi[i] = con.rhs
            if con.sense in (">=", "="):
                lo[i] = con.rhs
        A = sp.csc_matrix((vals, (rows, cols)), shape=(m, n), dtype=float)
        c = np.zeros(n)
        for j, cj in self.objective.items():
            c[j] = cj
        if self.sense == "max":
            c = -c
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        integer = np.array([v.is_integer for v in self.variables], dtype=bool)
        return A, lo, hi, c, lb, ub, integer

    def to_lp_text(self) -> str:
        """Dump the model in CPLEX LP-like text, for cross-checking elsewhere."""

        def term_list(coeffs):
            parts = []
            for j, a in sorted(coeffs.items()):
                sign = "-" if a < 0 else "+"
                parts.append(f"{sign} {abs(a):.12g} {self.variables[j].name}")
            text = " ".join(parts) or "0"
            return text[2:] if text.startswith("+ ") else text

        lines = [f"\\ {self.name}", "Maximize" if self.sense == "max" else "Minimize",
                 f" obj: {term_list(self.objective)}", "Subject To"]
        for i, con in enumerate(self.constraints):
            lines.append(f" {con.name or f'c{i}'}: {term_list(con.coeffs)} {con.sense} {con.rhs:.12g}")
        lines.append("Bounds")
        for v in self.variables:
            lo = "-inf" if v.lb == -math.inf else f"{v.lb:.12g}"
            hi = "+inf" if v.ub == math.inf else f"{v.ub:.12g}"
            lines.append(f" {lo} <= {v.name} <= {hi}")
        ints = [v.name for v in self.variables if v.kind == INTEGER]
        bins = [v.name for v in self.variables if v.kind == BINARY]
        if ints:
            lines += ["General", " " + " ".join(ints)]
        if bins:
            lines += ["Binary", " " + " ".join(bins)]
        lines.append("End")
        return "\n".join(lines) + "\n"


def linearize_product(model: MipModel, binary_var: int, continuous_var: int,
                      bounds: tuple[float, float], name: str | None = None) -> int:
    """Add ``z = binary * continuous`` through the four McCormick rows.

    ``bounds`` must be valid bounds ``(L, U)`` on the continuous variable.
    At ``binary in {0, 1}`` the rows pin ``z`` to the exact product.
    """
    low, high = float(bounds[0]), float(bounds[1])
    if not (math.isfinite(low) and math.isfinite(high)) or low > high:
        raise ModelError(f"invalid product bounds [{low}, {high}]")
    bvar = model.variables[binary_var]
    if bvar.kind != BINARY:
        raise ModelError(f"{bvar.name} is not binary")
    cname = model.variables[continuous_var].name
    name = name or f"{bvar.name}*{cname}"
    z = model.add_var(name, min(low, 0.0), max(high, 0.0), CONTINUOUS)
    b, c = binary_var, continuous_var
    model.add_constraint({z: 1.0, b: -low}, ">=", 0.0, f"{name}:lo")
    model.add_constraint({z: 1.0, b: -high}, "<=", 0.0, f"{name}:hi")
    model.add_constraint({z: 1.0, c: -1.0, b: -low}, "<=", -low, f"{name}:c_lo")
    model.add_constraint({z: 1.0, c: -1.0, b: -high}, ">=", -high, f"{name}:c_hi")
    return z
