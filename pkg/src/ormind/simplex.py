"""Two-phase primal simplex on a dense tableau.

Pivot selection starts with the largest-coefficient rule and switches to
Bland's rule after ``BLAND_SWITCH`` pivots, which guarantees termination on
degenerate problems.  All ties break toward the lowest index, so a given
standard form always produces the same pivot sequence.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .standard_form import StandardForm

BLAND_SWITCH = 1000

_RC_TOL = 1e-9       # reduced cost threshold for entering columns
_PIV_TOL = 1e-9      # minimum pivot element magnitude
_RATIO_TIE = 1e-9
_FEAS_TOL = 1e-7     # phase-1 objective above this means infeasible


@dataclass
class TableauOutcome:
    status: str          # "optimal" | "infeasible" | "unbounded" | "pivot_limit" | "time_limit"
    x: np.ndarray | None
    pivots: int


def _pivot(tab: np.ndarray, basis: list[int], row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    factors = tab[:, col].copy()
    factors[row] = 0.0
    tab -= np.outer(factors, tab[row])
    tab[:, col] = 0.0
    tab[row, col] = 1.0
    basis[row] = col


def _iterate(
    tab: np.ndarray,
    basis: list[int],
    n_cols: int,
    pivots: int,
    pivot_limit: int,
    deadline: float | None,
) -> tuple[str, int]:
    """Run simplex iterations until optimality or a terminal condition."""
    m = tab.shape[0] - 1
    while True:
        rc = tab[-1, :n_cols]
        if pivots < BLAND_SWITCH:
            j = int(np.argmin(rc))
            if rc[j] >= -_RC_TOL:
                return "optimal", pivots
        else:
            negative = np.nonzero(rc < -_RC_TOL)[0]
            if negative.size == 0:
                return "optimal", pivots
            j = int(negative[0])
        col = tab[:m, j]
        eligible = np.nonzero(col > _PIV_TOL)[0]
        if eligible.size == 0:
            return "unbounded", pivots
        ratios = tab[:m, -1][eligible] / col[eligible]
        best = ratios.min()
        ties = eligible[ratios <= best + _RATIO_TIE]
        # Bland-style leaving tie-break: lowest basis variable index
        row = int(min(ties, key=lambda r: basis[r]))
        if pivots >= pivot_limit:
            return "pivot_limit", pivots
        if deadline is not None and time.perf_counter() > deadline:
            return "time_limit", pivots
        _pivot(tab, basis, row, j)
        pivots += 1


def run_two_phase(
    std: StandardForm,
    pivot_limit: int = 50_000,
    deadline: float | None = None,
) -> TableauOutcome:
    """Solve the standard form; returns the column vector x on optimality."""
    a = std.a.copy()
    b = std.b.copy()
    m, n = a.shape
    if m == 0:
        # no rows: optimum is the origin unless some cost is negative
        if np.any(std.c < -_RC_TOL):
            return TableauOutcome("unbounded", None, 0)
        return TableauOutcome("optimal", np.zeros(n), 0)

    negative_rows = b < 0
    a[negative_rows] *= -1.0
    b[negative_rows] *= -1.0

    basis: list[int] = [-1] * m
    for i in range(m):
        slack = std.slack_col_of_row[i]
        if slack >= 0 and a[i, slack] > 0.5:
            basis[i] = slack
    artificial_rows = [i for i in range(m) if basis[i] == -1]
    pivots = 0

    if artificial_rows:
        n_art = len(artificial_rows)
        tab = np.zeros((m + 1, n + n_art + 1))
        tab[:m, :n] = a
        tab[:m, -1] = b
        for k, i in enumerate(artificial_rows):
            tab[i, n + k] = 1.0
            basis[i] = n + k
        # phase-1 reduced costs: cost 1 on artificials, reduced by the basis
        for i in artificial_rows:
            tab[-1] -= tab[i]
        tab[-1, n : n + n_art] = 0.0
        status, pivots = _iterate(tab, basis, n + n_art, pivots, pivot_limit, deadline)
        if status != "optimal":
            return TableauOutcome(status, None, pivots)
        if -tab[-1, -1] > _FEAS_TOL:
            return TableauOutcome("infeasible", None, pivots)
        # drive remaining artificials out of the basis or drop redundant rows
        drop_rows: list[int] = []
        for i in range(m):
            if basis[i] < n:
                continue
            entering = np.nonzero(np.abs(tab[i, :n]) > _PIV_TOL)[0]
            if entering.size == 0:
                drop_rows.append(i)
            else:
                _pivot(tab, basis, i, int(entering[0]))
                pivots += 1
        if drop_rows:
            keep = [i for i in range(m) if i not in drop_rows]
            tab = tab[keep + [m]]
            basis = [basis[i] for i in keep]
            m = len(keep)
        work = np.hstack([tab[:m, :n], tab[:m, -1:]])
    else:
        work = np.hstack([a, b[:, None]])

    tab = np.vstack([work, np.zeros(n + 1)])
    tab[-1, :n] = std.c
    for i in range(m):
        coef = std.c[basis[i]]
        if coef != 0.0:
            tab[-1] -= coef * tab[i]
    status, pivots = _iterate(tab, basis, n, pivots, pivot_limit, deadline)
    if status != "optimal":
        return TableauOutcome(status, None, pivots)

    x = np.zeros(n)
    for i in range(m):
        x[basis[i]] = tab[i, -1]
    x[np.abs(x) < 1e-11] = 0.0
    np.maximum(x, 0.0, out=x)
    return TableauOutcome("optimal", x, pivots)
