"""Word problems in, structured linear models and exact solutions out.

The library stages chat-model calls to translate a natural-language
optimization problem into a model-exchange document, solves it with an
embedded simplex / branch-and-bound solver, validates the answer through
counterfactual checks, and repairs failures with supervised feedback.
"""

from .counterfactual import (
    CheckKind,
    CounterfactualReport,
    FeedbackDoc,
    ModificationCheck,
    analyze,
    derive_checks,
    diagnose_failure,
    report_to_feedback,
)
from .model import (
    Constraint,
    LinExpr,
    ModelIR,
    Objective,
    ObjSense,
    Sense,
    VariableDef,
    VarKind,
    evaluate,
)
from .parsing import (
    parse_constraint,
    parse_linear_expr,
    parse_model_document,
    render_expr,
    render_model_document,
)
from .pipeline import (
    Classification,
    MathModelDraft,
    MemoryPool,
    ParameterSet,
    ProblemInput,
    ProblemInstance,
    RunConfig,
    RunOutcome,
    classify,
    solve_problem,
)
from .solver import (
    SolveResult,
    SolveStats,
    SolveStatus,
    SolverOptions,
    Violation,
    check_feasibility,
    solve_lp,
    solve_milp,
)
from .standard_form import StandardForm, canonicalize

__version__ = "0.1.0"

__all__ = [
    "CheckKind",
    "Classification",
    "Constraint",
    "CounterfactualReport",
    "FeedbackDoc",
    "LinExpr",
    "MathModelDraft",
    "MemoryPool",
    "ModelIR",
    "ModificationCheck",
    "Objective",
    "ObjSense",
    "ParameterSet",
    "ProblemInput",
    "ProblemInstance",
    "RunConfig",
    "RunOutcome",
    "Sense",
    "SolveResult",
    "SolveStats",
    "SolveStatus",
    "SolverOptions",
    "StandardForm",
    "VariableDef",
    "VarKind",
    "Violation",
    "analyze",
    "canonicalize",
    "check_feasibility",
    "classify",
    "derive_checks",
    "diagnose_failure",
    "evaluate",
    "parse_constraint",
    "parse_linear_expr",
    "parse_model_document",
    "render_expr",
    "render_model_document",
    "report_to_feedback",
    "solve_lp",
    "solve_milp",
    "solve_problem",
]
