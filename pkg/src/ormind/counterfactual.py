"""Counterfactual solution checking.

Instead of asking "is this solution feasible", each derived check asks what
would have to change for the candidate solution to be valid: a failing check
yields a suggestion naming the achieved value (the relaxation that would
make the candidate pass).  The catalog covers every finite variable bound,
every constraint, integrality of integer variables, and integrality of the
objective when the objective data is integral.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping

from .errors import NoModificationsNeededError, StatusNotOptimalError
from .model import LinExpr, ModelIR, NEG_INF, POS_INF, Sense, evaluate, is_integral_expr
from .parsing import render_expr
from .solver import SolveResult, SolveStatus


class CheckKind(str, Enum):
    LOWER_BOUND = "LowerBound"
    UPPER_BOUND = "UpperBound"
    RESOURCE = "ResourceConstraint"
    RATIO = "RatioConstraint"
    INTEGRALITY_VAR = "IntegralityVar"
    INTEGRALITY_OBJ = "IntegralityObj"


@dataclass(frozen=True)
class ModificationCheck:
    """One "what would need to change" probe over a candidate solution."""

    id: str
    kind: CheckKind
    subject: str                      # constraint or variable name ("" for model-level)
    expr: LinExpr | None = None       # constraint lhs for constraint-backed checks
    sense: Sense | None = None
    bound: float = 0.0                # rhs / lower / upper, per kind
    int_vars: tuple[str, ...] = ()
    ratio_pct: float = 0.0
    eps: float = 1e-2

    def achieved(self, assignment: Mapping[str, float], objective: float) -> float:
        if self.kind in (CheckKind.LOWER_BOUND, CheckKind.UPPER_BOUND):
            return assignment[self.subject]
        if self.kind in (CheckKind.RESOURCE, CheckKind.RATIO):
            return evaluate(self.expr, assignment)
        if self.kind is CheckKind.INTEGRALITY_OBJ:
            return objective
        raise ValueError(f"no scalar achieved value for {self.kind}")

    def predicate(
        self, assignment: Mapping[str, float], objective: float, eps: float | None = None
    ) -> bool:
        """True when the candidate passes and no modification is needed.

        Comparison arithmetic matches check_feasibility exactly so the two
        modules always agree at the same epsilon.
        """
        eps = self.eps if eps is None else eps
        if self.kind is CheckKind.LOWER_BOUND:
            return not (self.bound - assignment[self.subject]) > eps
        if self.kind is CheckKind.UPPER_BOUND:
            return not (assignment[self.subject] - self.bound) > eps
        if self.kind in (CheckKind.RESOURCE, CheckKind.RATIO):
            achieved = evaluate(self.expr, assignment)
            if self.sense is Sense.LE:
                return not (achieved - self.bound) > eps
            if self.sense is Sense.GE:
                return not (self.bound - achieved) > eps
            return not abs(achieved - self.bound) > eps
        if self.kind is CheckKind.INTEGRALITY_VAR:
            return all(abs(assignment[n] - round(assignment[n])) <= eps for n in self.int_vars)
        return not abs(objective - round(objective)) > eps

    def suggestion(self, assignment: Mapping[str, float], objective: float) -> str:
        if self.kind in (CheckKind.LOWER_BOUND, CheckKind.UPPER_BOUND):
            return f"Adjust constraint to allow {self.subject} to be {assignment[self.subject]:.2f}"
        if self.kind is CheckKind.RATIO:
            direction = "least" if self.sense is Sense.GE else "most"
            return f"Adjust constraint to ensure at {direction} {self.ratio_pct:g}%"
        if self.kind is CheckKind.RESOURCE:
            achieved = evaluate(self.expr, assignment)
            if self.sense is Sense.EQ:
                return (
                    f"Modify constraint {self.subject} to make its right-hand side {achieved:.2f}"
                )
            return (
                f"Modify resource constraint to allow {render_expr(self.expr)} "
                f"to be {achieved:.2f}"
            )
        if self.kind is CheckKind.INTEGRALITY_VAR:
            return "Remove integer constraint on variables"
        return "Remove integer constraint on objective"


@dataclass(frozen=True)
class ReportEntry:
    modification_needed: bool
    suggestion: str | None


@dataclass(frozen=True)
class CounterfactualReport:
    entries: Mapping[str, ReportEntry]
    solution_valid_without_changes: bool

    def needed(self) -> list[tuple[str, str]]:
        return [
            (check_id, entry.suggestion)
            for check_id, entry in self.entries.items()
            if entry.modification_needed
        ]

    def to_json(self) -> dict:
        return {
            "entries": {
                check_id: {
                    "modification_needed": entry.modification_needed,
                    "suggestion": entry.suggestion,
                }
                for check_id, entry in self.entries.items()
            },
            "solution_valid_without_changes": self.solution_valid_without_changes,
        }


@dataclass(frozen=True)
class FeedbackDoc:
    """Ordered feedback lines for the backward supervision prompt."""

    entries: tuple[tuple[str, str], ...]

    def to_text(self) -> str:
        return "\n".join(f"<<{label}>>: {text}" for label, text in self.entries)

    def to_json(self) -> dict:
        return {"entries": [{"label": label, "text": text} for label, text in self.entries]}


def _classify_constraint(lhs: LinExpr, sense: Sense, rhs: float) -> tuple[CheckKind, float]:
    """Detect percentage-style constraints: zero rhs with uniformly scaled
    positive and negative coefficient groups, as produced by normalizing
    ``x >= r*(x + y + ...)``.  Returns (kind, ratio percentage)."""
    if sense is Sense.EQ or rhs != 0.0 or not lhs.terms:
        return CheckKind.RESOURCE, 0.0
    pos = [c for c in lhs.terms.values() if c > 0]
    neg = [-c for c in lhs.terms.values() if c < 0]
    if not pos or not neg:
        return CheckKind.RESOURCE, 0.0
    if max(pos) - min(pos) > 1e-9 or max(neg) - min(neg) > 1e-9:
        return CheckKind.RESOURCE, 0.0
    ratio = neg[0] / (pos[0] + neg[0])
    return CheckKind.RATIO, 100.0 * ratio


def derive_checks(model: ModelIR, eps: float) -> list[ModificationCheck]:
    """Mechanical check catalog for a model: bounds, constraints, integrality."""
    checks: list[ModificationCheck] = []

    def next_id() -> str:
        return f"Modification{len(checks) + 1}"

    for v in model.variables:
        if v.lower > NEG_INF:
            checks.append(
                ModificationCheck(next_id(), CheckKind.LOWER_BOUND, v.name, bound=v.lower, eps=eps)
            )
        if v.upper < POS_INF:
            checks.append(
                ModificationCheck(next_id(), CheckKind.UPPER_BOUND, v.name, bound=v.upper, eps=eps)
            )
    for c in model.constraints:
        kind, pct = _classify_constraint(c.lhs, c.sense, c.rhs)
        checks.append(
            ModificationCheck(
                next_id(), kind, c.name, expr=c.lhs, sense=c.sense, bound=c.rhs,
                ratio_pct=pct, eps=eps,
            )
        )
    int_vars = model.integer_vars
    if int_vars:
        checks.append(
            ModificationCheck(
                next_id(), CheckKind.INTEGRALITY_VAR, "", int_vars=int_vars, eps=eps
            )
        )
    if is_integral_expr(model.objective.expr):
        checks.append(ModificationCheck(next_id(), CheckKind.INTEGRALITY_OBJ, "", eps=eps))
    return checks


def analyze(
    checks: list[ModificationCheck], solution: SolveResult, eps: float
) -> CounterfactualReport:
    """Evaluate every check against an optimal solver result."""
    if solution.status is not SolveStatus.OPTIMAL:
        raise StatusNotOptimalError(
            f"counterfactual analysis requires an Optimal result, got {solution.status.value}"
        )
    assignment = solution.assignment
    objective = solution.objective
    entries: dict[str, ReportEntry] = {}
    all_valid = True
    for check in checks:
        passed = check.predicate(assignment, objective, eps)
        suggestion = None if passed else check.suggestion(assignment, objective)
        entries[check.id] = ReportEntry(not passed, suggestion)
        if not passed:
            all_valid = False
    return CounterfactualReport(entries, all_valid)


def report_to_feedback(report: CounterfactualReport) -> FeedbackDoc:
    """Feedback lines for every needed modification, in catalog order."""
    needed = report.needed()
    if not needed:
        raise NoModificationsNeededError("report contains no needed modifications")
    return FeedbackDoc(tuple(needed))


def diagnose_failure(failure, context: str | None = None) -> FeedbackDoc:
    """Name the failing artifact and a probable cause for a failed execute step.

    ``failure`` is either a parsing/model exception or a non-optimal
    SolveResult; ``context`` optionally refines the blamed section.
    """
    if isinstance(failure, SolveResult):
        if failure.status is SolveStatus.ERROR:
            cause = failure.message or "solver error"
        elif failure.status is SolveStatus.INFEASIBLE:
            cause = (
                "model is infeasible but a numeric optimum is expected; "
                "check constraint senses, right-hand sides, and bounds"
            )
        elif failure.status is SolveStatus.UNBOUNDED:
            cause = (
                "model is unbounded; a limiting resource constraint or an "
                "upper bound is likely missing"
            )
        else:
            cause = f"unexpected solver status {failure.status.value}"
        return FeedbackDoc(((context or "solver", cause),))
    section = getattr(failure, "section", None) or context or "document"
    return FeedbackDoc(((section, str(failure)),))
