"""Exact desk-scale solving: LP via two-phase simplex, MILP via branch and bound.

Branch and bound is best-first on the LP relaxation bound, branching on the
most fractional integer variable (lexicographic tie-break), so results and
node/pivot counts are deterministic for a given model and options.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from .errors import MissingAssignmentError
from .model import ModelIR, ObjSense, Sense, evaluate
from .simplex import run_two_phase
from .standard_form import StandardForm, canonicalize


class SolveStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ERROR = "Error"


@dataclass
class SolverOptions:
    pivot_limit: int = 50_000
    node_limit: int = 100_000
    feasibility_eps: float = 1e-2
    integrality_tol: float = 1e-6
    time_limit: float = 10.0


@dataclass
class SolveStats:
    pivots: int = 0
    nodes: int = 0
    wall_time: float = 0.0


@dataclass
class SolveResult:
    status: SolveStatus
    objective: float | None = None
    assignment: dict[str, float] | None = None
    stats: SolveStats = field(default_factory=SolveStats)
    message: str = ""

    @property
    def is_optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL


@dataclass(frozen=True)
class Violation:
    """One constraint, bound, or integrality breach.

    ``slack`` is signed so that a positive value means violated: for LE rows
    it is achieved - required, for GE rows required - achieved, and for EQ
    (and integrality) the absolute deviation.
    """

    name: str
    achieved: float
    required: float
    sense: Sense
    slack: float


_STATUS_FROM_TABLEAU = {
    "infeasible": SolveStatus.INFEASIBLE,
    "unbounded": SolveStatus.UNBOUNDED,
}


def solve_lp(
    std: StandardForm,
    opts: SolverOptions | None = None,
    deadline: float | None = None,
) -> SolveResult:
    """Solve the LP in standard form; assignment and objective are reported
    in the original model's variable space and objective sense."""
    opts = opts or SolverOptions()
    start = time.perf_counter()
    if deadline is None and opts.time_limit:
        deadline = start + opts.time_limit
    outcome = run_two_phase(std, pivot_limit=opts.pivot_limit, deadline=deadline)
    elapsed = time.perf_counter() - start
    stats = SolveStats(pivots=outcome.pivots, nodes=0, wall_time=elapsed)
    if outcome.status == "optimal":
        assignment = std.map_back(outcome.x)
        objective = evaluate(std.source.objective.expr, assignment)
        return SolveResult(SolveStatus.OPTIMAL, objective, assignment, stats)
    if outcome.status in _STATUS_FROM_TABLEAU:
        return SolveResult(_STATUS_FROM_TABLEAU[outcome.status], stats=stats)
    message = {
        "pivot_limit": f"pivot limit exhausted ({opts.pivot_limit})",
        "time_limit": f"time limit exceeded ({opts.time_limit}s)",
    }[outcome.status]
    return SolveResult(SolveStatus.ERROR, stats=stats, message=message)


def _internal_value(objective: float, maximize: bool) -> float:
    return -objective if maximize else objective


def _fractional_var(
    model: ModelIR, assignment: Mapping[str, float], tol: float
) -> tuple[str, float] | None:
    """Most fractional integer variable, ties broken by name."""
    best_name = None
    best_value = 0.0
    best_dist = tol
    for name in sorted(model.integer_vars):
        value = assignment[name]
        dist = abs(value - round(value))
        if dist > best_dist:
            best_name, best_value, best_dist = name, value, dist
    if best_name is None:
        return None
    return best_name, best_value


def _snap_integers(model: ModelIR, assignment: Mapping[str, float], tol: float) -> dict[str, float]:
    snapped = dict(assignment)
    for name in model.integer_vars:
        value = snapped[name]
        if abs(value - round(value)) <= tol:
            snapped[name] = float(round(value))
    return snapped


def solve_milp(model: ModelIR, opts: SolverOptions | None = None) -> SolveResult:
    """Exact optimum of the mixed-integer model, or Infeasible/Unbounded.

    Deterministic for fixed options; reports total simplex pivots and the
    number of LP relaxations solved across the search tree.
    """
    opts = opts or SolverOptions()
    start = time.perf_counter()
    deadline = start + opts.time_limit if opts.time_limit else None
    maximize = model.objective.sense is ObjSense.MAX
    total_pivots = 0
    nodes = 0

    def finish(result: SolveResult) -> SolveResult:
        result.stats = SolveStats(total_pivots, nodes, time.perf_counter() - start)
        return result

    def relax(node_model: ModelIR) -> SolveResult:
        nonlocal total_pivots, nodes
        res = solve_lp(canonicalize(node_model), opts, deadline=deadline)
        total_pivots += res.stats.pivots
        nodes += 1
        return res

    root = relax(model)
    if root.status is not SolveStatus.OPTIMAL:
        return finish(SolveResult(root.status, message=root.message))

    bounds: dict[str, tuple[float, float]] = {
        v.name: (v.lower, v.upper) for v in model.variables
    }
    counter = 0
    heap: list[tuple[float, int, dict, SolveResult]] = []
    heapq.heappush(
        heap, (_internal_value(root.objective, maximize), counter, dict(bounds), root)
    )
    incumbent: tuple[float, SolveResult] | None = None

    while heap:
        if nodes > opts.node_limit:
            return finish(
                SolveResult(SolveStatus.ERROR, message=f"node limit exhausted ({opts.node_limit})")
            )
        if deadline is not None and time.perf_counter() > deadline:
            return finish(
                SolveResult(SolveStatus.ERROR, message=f"time limit exceeded ({opts.time_limit}s)")
            )
        bound, _, node_bounds, res = heapq.heappop(heap)
        if incumbent is not None and bound >= incumbent[0] - 1e-9:
            break  # best-first: every remaining node is at least as bad
        branch = _fractional_var(model, res.assignment, opts.integrality_tol)
        if branch is None:
            value = _internal_value(res.objective, maximize)
            if incumbent is None or value < incumbent[0] - 1e-12:
                incumbent = (value, res)
            continue
        name, value = branch
        lo, hi = node_bounds[name]
        for child_lo, child_hi in (
            (lo, math.floor(value)),
            (math.ceil(value), hi),
        ):
            if child_lo > child_hi:
                continue
            child_bounds = dict(node_bounds)
            child_bounds[name] = (float(child_lo), float(child_hi))
            child = relax(model.with_bounds(child_bounds))
            if child.status is SolveStatus.INFEASIBLE:
                continue
            if child.status is not SolveStatus.OPTIMAL:
                return finish(
                    SolveResult(
                        SolveStatus.ERROR,
                        message=child.message or f"unexpected {child.status.value} at a branch node",
                    )
                )
            child_bound = _internal_value(child.objective, maximize)
            if incumbent is not None and child_bound >= incumbent[0] - 1e-9:
                continue
            counter += 1
            heapq.heappush(heap, (child_bound, counter, child_bounds, child))

    if incumbent is None:
        return finish(SolveResult(SolveStatus.INFEASIBLE))
    best = incumbent[1]
    assignment = _snap_integers(model, best.assignment, opts.integrality_tol)
    objective = evaluate(model.objective.expr, assignment)
    return finish(SolveResult(SolveStatus.OPTIMAL, objective, assignment))


def check_feasibility(
    model: ModelIR, assignment: Mapping[str, float], eps: float
) -> list[Violation]:
    """All constraint, bound, and integrality violations beyond ``eps``.

    Integrality uses the same epsilon: a value counts as integral when it is
    within ``eps`` of the nearest integer.
    """
    violations: list[Violation] = []
    for v in model.variables:
        if v.name not in assignment:
            raise MissingAssignmentError(v.name)
        value = assignment[v.name]
        if v.lower != float("-inf") and (v.lower - value) > eps:
            violations.append(Violation(f"{v.name}.lb", value, v.lower, Sense.GE, v.lower - value))
        if v.upper != float("inf") and (value - v.upper) > eps:
            violations.append(Violation(f"{v.name}.ub", value, v.upper, Sense.LE, value - v.upper))
    for c in model.constraints:
        achieved = evaluate(c.lhs, assignment)
        if c.sense is Sense.LE:
            slack = achieved - c.rhs
        elif c.sense is Sense.GE:
            slack = c.rhs - achieved
        else:
            slack = abs(achieved - c.rhs)
        if slack > eps:
            violations.append(Violation(c.name, achieved, c.rhs, c.sense, slack))
    for name in model.integer_vars:
        value = assignment[name]
        dist = abs(value - round(value))
        if dist > eps:
            violations.append(Violation(f"{name}.int", value, float(round(value)), Sense.EQ, dist))
    return violations
