"""Conversion of a ModelIR to simplex standard form.

Standard form is a minimization over nonnegative column variables with all
rows as equalities: shifted/split original variables first, then one slack
or surplus column per inequality row.  Finite variable bounds become rows;
the mapping back to original variable space is recorded on the result.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .model import (
    LinExpr,
    ModelIR,
    NEG_INF,
    ObjSense,
    POS_INF,
    Sense,
)


@dataclass(frozen=True)
class VarMap:
    """How one original variable maps into standard-form columns.

    mode "shift":    x = offset + col          (finite lower bound)
    mode "negshift": x = offset - col          (upper bound only)
    mode "split":    x = col - neg_col         (free variable)
    """

    name: str
    mode: str
    offset: float
    col: int
    neg_col: int = -1

    def recover(self, x: np.ndarray) -> float:
        if self.mode == "shift":
            return self.offset + x[self.col]
        if self.mode == "negshift":
            return self.offset - x[self.col]
        return x[self.col] - x[self.neg_col]


@dataclass
class StandardForm:
    a: np.ndarray                 # (rows, cols)
    b: np.ndarray                 # (rows,)
    c: np.ndarray                 # (cols,) minimization costs
    c0: float                     # constant of the minimization objective
    maximize: bool                # original objective sense
    col_names: list[str]
    row_names: list[str]
    var_maps: list[VarMap]
    slack_col_of_row: list[int]   # -1 for equality rows
    n_structural: int             # rows that came from model constraints
    source: ModelIR

    def map_back(self, x: np.ndarray) -> dict[str, float]:
        return {vm.name: float(vm.recover(x)) for vm in self.var_maps}

    def min_objective(self, x: np.ndarray) -> float:
        return float(self.c @ x) + self.c0


def _shift_expr(expr: LinExpr, var_maps: Mapping[str, VarMap], n_cols: int) -> tuple[np.ndarray, float]:
    """Rewrite an original-space expression over standard-form columns."""
    row = np.zeros(n_cols)
    const = expr.constant
    for name, coef in expr.terms.items():
        vm = var_maps[name]
        if vm.mode == "shift":
            row[vm.col] += coef
            const += coef * vm.offset
        elif vm.mode == "negshift":
            row[vm.col] -= coef
            const += coef * vm.offset
        else:
            row[vm.col] += coef
            row[vm.neg_col] -= coef
    return row, const


def canonicalize(model: ModelIR) -> StandardForm:
    """Transform a valid ModelIR to standard form (total: never fails)."""
    var_maps: list[VarMap] = []
    col_names: list[str] = []
    for v in model.variables:
        col = len(col_names)
        if v.lower > NEG_INF:
            var_maps.append(VarMap(v.name, "shift", v.lower, col))
            col_names.append(v.name)
        elif v.upper < POS_INF:
            var_maps.append(VarMap(v.name, "negshift", v.upper, col))
            col_names.append(v.name)
        else:
            var_maps.append(VarMap(v.name, "split", 0.0, col, col + 1))
            col_names.append(f"{v.name}__pos")
            col_names.append(f"{v.name}__neg")
    n_var_cols = len(col_names)
    by_name = {vm.name: vm for vm in var_maps}

    # structural rows, then bound rows for the non-anchored finite bound
    rows: list[tuple[np.ndarray, float, Sense, str]] = []
    for c in model.constraints:
        row, const = _shift_expr(c.lhs, by_name, n_var_cols)
        rows.append((row, c.rhs - const, c.sense, c.name))
    n_structural = len(rows)
    for v in model.variables:
        vm = by_name[v.name]
        if vm.mode == "shift" and v.upper < POS_INF:
            row = np.zeros(n_var_cols)
            row[vm.col] = 1.0
            rows.append((row, v.upper - v.lower, Sense.LE, f"{v.name}.ub"))
        elif vm.mode == "negshift" and v.lower > NEG_INF:
            row = np.zeros(n_var_cols)
            row[vm.col] = 1.0
            rows.append((row, v.upper - v.lower, Sense.LE, f"{v.name}.lb"))

    n_slacks = sum(1 for r in rows if r[2] is not Sense.EQ)
    n_cols = n_var_cols + n_slacks
    a = np.zeros((len(rows), n_cols))
    b = np.zeros(len(rows))
    row_names: list[str] = []
    slack_col_of_row: list[int] = []
    next_slack = n_var_cols
    for i, (row, rhs, sense, name) in enumerate(rows):
        a[i, :n_var_cols] = row
        b[i] = rhs
        row_names.append(name)
        if sense is Sense.EQ:
            slack_col_of_row.append(-1)
        else:
            a[i, next_slack] = 1.0 if sense is Sense.LE else -1.0
            col_names.append(f"__s{i}")
            slack_col_of_row.append(next_slack)
            next_slack += 1

    obj_row, obj_const = _shift_expr(model.objective.expr, by_name, n_var_cols)
    maximize = model.objective.sense is ObjSense.MAX
    if maximize:
        obj_row = -obj_row
        obj_const = -obj_const
    c = np.zeros(n_cols)
    c[:n_var_cols] = obj_row

    return StandardForm(
        a=a,
        b=b,
        c=c,
        c0=obj_const,
        maximize=maximize,
        col_names=col_names,
        row_names=row_names,
        var_maps=var_maps,
        slack_col_of_row=slack_col_of_row,
        n_structural=n_structural,
        source=model,
    )
