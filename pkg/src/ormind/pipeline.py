"""Staged solving pipeline.

A run walks one problem instance through five agent stages (semantic
encoding, formalization, compilation, forward supervision, reasoning) with
two repair branches: a syntax branch for failed executions and a
counterfactual branch for solutions that contradict the formalized facts.
Every stage output lands in an append-only memory pool and in the run trace;
traces are byte-identical across replays of the same fixtures.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

from . import prompts
from .counterfactual import (
    CounterfactualReport,
    FeedbackDoc,
    analyze,
    derive_checks,
    diagnose_failure,
    report_to_feedback,
)
from .errors import (
    FixtureMissError,
    ModelError,
    ScriptExhaustedError,
    StageParseError,
    TransportError,
)
from .llm import ChatClient, ChatMessage, ChatRequest, TranscriptUnits, count_transcript_units
from .model import ModelIR, evaluate
from .parsing import extract_document, parse_constraint, parse_model_document
from .solver import SolveResult, SolveStatus, SolverOptions, solve_milp


class Classification(str, Enum):
    SUCCESS = "Success"
    WRONG_ANSWER = "WrongAnswer"
    FORMULATION_FAILURE = "FormulationFailure"
    EXECUTION_FAILURE = "ExecutionFailure"


@dataclass(frozen=True)
class ParamSpec:
    symbol: str
    definition: str = ""
    shape: tuple = ()


@dataclass(frozen=True)
class ProblemInstance:
    input: Mapping[str, object] = field(default_factory=dict)
    expected: tuple = ()


@dataclass(frozen=True)
class ProblemInput:
    id: str
    description: str
    parameters: tuple[ParamSpec, ...] = ()
    instances: tuple[ProblemInstance, ...] = ()

    def __post_init__(self):
        if not self.description:
            raise ValueError(f"problem {self.id!r} has an empty description")


@dataclass(frozen=True)
class ParameterSet:
    entries: Mapping[str, dict]


@dataclass(frozen=True)
class MathModelDraft:
    variables_text: str
    constraints_text: str
    objective_text: str


@dataclass(frozen=True)
class PoolEntry:
    agent: str
    timestamp: int  # logical insertion index, so replayed traces stay identical
    content: str


class MemoryPool:
    """Ordered append-only repository of stage outputs within one run."""

    def __init__(self):
        self._entries: list[PoolEntry] = []

    def append(self, agent: str, content: str) -> PoolEntry:
        entry = PoolEntry(agent, len(self._entries), content)
        self._entries.append(entry)
        return entry

    @property
    def entries(self) -> tuple[PoolEntry, ...]:
        return tuple(self._entries)

    def latest(self, agent: str) -> str | None:
        for entry in reversed(self._entries):
            if entry.agent == agent:
                return entry.content
        return None

    def __len__(self) -> int:
        return len(self._entries)


@dataclass
class RunConfig:
    max_syntax_repairs: int = 1
    max_cf_repairs: int = 1
    temperature: float = 0.0
    model_id: str = "gpt-3.5-turbo"
    solver: SolverOptions = field(default_factory=SolverOptions)
    llm_reasoner_enabled: bool = False

    def __post_init__(self):
        if self.max_syntax_repairs < 0 or self.max_cf_repairs < 0:
            raise ValueError("repair caps must be >= 0")


@dataclass
class RunTrace:
    problem_id: str
    instance_index: int
    events: list[dict] = field(default_factory=list)
    classification: str = ""
    repairs: dict = field(default_factory=lambda: {"syntax": 0, "counterfactual": 0})
    final: dict | None = None
    expected: list = field(default_factory=list)
    transcript_units: dict = field(default_factory=lambda: {"per_stage": {}, "total": 0})

    def to_json_dict(self) -> dict:
        return {
            "problem_id": self.problem_id,
            "instance_index": self.instance_index,
            "classification": self.classification,
            "repairs": self.repairs,
            "final": self.final,
            "expected": self.expected,
            "transcript_units": self.transcript_units,
            "events": self.events,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)


@dataclass
class RunOutcome:
    classification: Classification
    final: SolveResult | None
    model: ModelIR | None
    repairs: tuple[int, int]  # (syntax, counterfactual)
    trace: RunTrace


def _tolerance(expected: float) -> float:
    return max(1e-2, 1e-4 * abs(expected))


def value_matches(actual: float, expected: float) -> bool:
    return abs(actual - expected) <= _tolerance(expected)


def result_matches_expected(
    final: SolveResult, expected: Sequence, model: ModelIR | None
) -> bool:
    """Ground-truth comparison: single numbers match the objective, the
    literal "Infeasible" matches an infeasible status, and longer lists match
    (objective, then variables in declaration order) element-wise."""
    if not expected:
        return final.is_optimal
    if len(expected) == 1:
        e = expected[0]
        if isinstance(e, str):
            return e.lower() == "infeasible" and final.status is SolveStatus.INFEASIBLE
        return final.is_optimal and value_matches(final.objective, float(e))
    if not final.is_optimal or model is None:
        return False
    values = [final.objective] + [final.assignment[n] for n in model.var_names]
    if len(expected) > len(values):
        return False
    return all(
        not isinstance(e, str) and value_matches(v, float(e))
        for e, v in zip(expected, values)
    )


def classify(
    model_produced: bool,
    executes: Sequence[SolveResult],
    final: SolveResult | None,
    expected: Sequence,
    model: ModelIR | None,
) -> Classification:
    """Four-way run classification.

    Precedence: no validated model at all, then runs whose every execution
    failed outright (solver error, unbounded, or a resource limit), then the
    final result against the expected values, else a wrong answer.
    """
    if not model_produced:
        return Classification.FORMULATION_FAILURE
    if executes and all(
        r.status in (SolveStatus.ERROR, SolveStatus.UNBOUNDED) for r in executes
    ):
        return Classification.EXECUTION_FAILURE
    if final is not None and result_matches_expected(final, expected, model):
        return Classification.SUCCESS
    return Classification.WRONG_ANSWER


def scalar_parameters(instance: ProblemInstance) -> dict[str, float]:
    """Numeric scalars from the instance input, usable in expressions."""
    out: dict[str, float] = {}
    for name, value in instance.input.items():
        if isinstance(value, bool):
            continue
        if isinstance(value, (int, float)):
            out[name] = float(value)
    return out


def _split_outside_parens(text: str, separators: str = ",;") -> list[str]:
    pieces: list[str] = []
    depth = 0
    current: list[str] = []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth = max(0, depth - 1)
        if ch in separators and depth == 0:
            pieces.append("".join(current))
            current = []
        else:
            current.append(ch)
    pieces.append("".join(current))
    return pieces


def split_draft_constraints(text: str) -> list[str]:
    """Candidate constraint strings from a formalization draft."""
    pieces: list[str] = []
    for line in text.splitlines():
        line = re.sub(r"^\s*\d+[.)]\s*", "", line.strip())
        if line:
            pieces.extend(_split_outside_parens(line))
    return [p.strip() for p in pieces if p.strip()]


def build_reference_model(
    model: ModelIR, draft: MathModelDraft | None, parameters: Mapping[str, float]
) -> tuple[ModelIR, int]:
    """Fact model for counterfactual checking: the validated variables and
    objective combined with every draft constraint that parses.  Draft lines
    that fall outside the expression grammar are skipped; the solved model's
    own constraints are not rechecked (its optimum satisfies them by
    construction).  Returns (reference model, number of parsed facts)."""
    names = frozenset(model.var_names)
    constraints = []
    if draft is not None:
        for piece in split_draft_constraints(draft.constraints_text):
            k = len(constraints) + 1
            auto = f"c{k}" if f"c{k}" not in names else f"fact{k}"
            try:
                constraints.append(parse_constraint(piece, names, parameters, name=auto))
            except ModelError:
                continue
    reference = ModelIR(model.variables, tuple(constraints), model.objective)
    return reference, len(constraints)


class _Run:
    """Mutable state for a single (problem, instance) pipeline execution."""

    def __init__(
        self,
        problem: ProblemInput,
        instance: ProblemInstance,
        config: RunConfig,
        client: ChatClient,
        instance_index: int = 0,
    ):
        self.problem = problem
        self.instance = instance
        self.config = config
        self.client = client
        self.pool = MemoryPool()
        self.trace = RunTrace(problem.id, instance_index, expected=list(instance.expected))
        self.attempts: dict[str, int] = {}
        self.params = scalar_parameters(instance)
        self.last_parse_error: ModelError | None = None
        self.current_doc: str = ""

    # -- trace plumbing ------------------------------------------------

    def _event(self, kind: str, **payload) -> dict:
        event = {"seq": len(self.trace.events), "kind": kind}
        event.update(payload)
        self.trace.events.append(event)
        return event

    def note(self, text: str) -> None:
        self._event("note", text=text)

    # -- prompt assembly ------------------------------------------------

    def _description_with_data(self) -> str:
        text = self.problem.description
        if self.problem.parameters:
            lines = [
                f"- {p.symbol}{' ' + str(list(p.shape)) if p.shape else ''}: {p.definition}"
                for p in self.problem.parameters
            ]
            text += "\n\nKnown parameters:\n" + "\n".join(lines)
        if self.instance.input:
            text += "\n\nInstance data (parameter values):\n" + json.dumps(
                dict(self.instance.input), sort_keys=True
            )
        return text

    def _call(self, stage: str, messages: list[ChatMessage]) -> str:
        attempt = self.attempts.get(stage, 0)
        self.attempts[stage] = attempt + 1
        request = ChatRequest(
            model_id=self.config.model_id,
            temperature=self.config.temperature,
            messages=tuple(messages),
        )
        response = self.client.complete(request, key=(stage, self.problem.id, attempt))
        self._event(
            "stage",
            stage=stage,
            attempt=attempt,
            messages=[{"role": m.role, "content": m.content} for m in messages],
            response=response.content,
            usage=None
            if response.usage is None
            else {
                "prompt_units": response.usage.prompt_units,
                "completion_units": response.usage.completion_units,
            },
            retries=response.retries,
            pool_size=len(self.pool),
        )
        return response.content

    def _stage_with_reprompt(self, stage: str, prompt: str, validator):
        """Run a stage, allowing one reprompt when the output fails to parse."""
        messages = [ChatMessage("user", prompt)]
        detail = ""
        for _ in range(2):
            text = self._call(stage, messages)
            try:
                parsed = validator(text)
            except (ValueError, KeyError, TypeError) as exc:
                detail = str(exc)
                messages = messages + [
                    ChatMessage("assistant", text),
                    ChatMessage(
                        "user", prompts.REPROMPT_REMINDER.replace("{detail}", detail)
                    ),
                ]
                continue
            self.pool.append(stage, text)
            self.trace.events[-1]["pool_size"] = len(self.pool)
            return text, parsed
        raise StageParseError(stage, detail or "output could not be parsed")

    # -- the five stages -------------------------------------------------

    def stage_semantic_encoder(self) -> ParameterSet:
        prompt = prompts.stage_prompt(
            prompts.SEMANTIC_ENCODER,
            {
                "problem_example": self._description_with_data(),
                "comment_text": "(no comments yet)",
            },
        )

        def validator(text: str) -> ParameterSet:
            data = json.loads(extract_document(text))
            if not isinstance(data, dict) or not data:
                raise ValueError("expected a nonempty JSON object of parameters")
            entries: dict[str, dict] = {}
            for name, info in data.items():
                if isinstance(info, dict):
                    entries[str(name)] = {
                        "type": str(info.get("Type", info.get("type", ""))),
                        "definition": str(info.get("Definition", info.get("definition", ""))),
                    }
                else:
                    entries[str(name)] = {"type": "", "definition": str(info)}
            return ParameterSet(entries)

        def guarded(text: str) -> ParameterSet:
            try:
                return validator(text)
            except (json.JSONDecodeError, ModelError) as exc:
                raise ValueError(f"not a JSON parameter map: {exc}") from exc

        _, parsed = self._stage_with_reprompt(prompts.SEMANTIC_ENCODER, prompt, guarded)
        return parsed

    def stage_formalization(self, params: ParameterSet) -> MathModelDraft:
        prompt = prompts.stage_prompt(
            prompts.FORMALIZATION,
            {
                "problem_description": self._description_with_data(),
                "comments_text": self.pool.latest(prompts.SEMANTIC_ENCODER) or "",
            },
        )

        def validator(text: str) -> MathModelDraft:
            try:
                data = json.loads(extract_document(text))
            except (json.JSONDecodeError, ModelError) as exc:
                raise ValueError(f"not a JSON model draft: {exc}") from exc
            if not isinstance(data, dict):
                raise ValueError("model draft must be a JSON object")
            lowered = {str(k).lower(): v for k, v in data.items()}
            missing = [k for k in ("variables", "constraints", "objective") if k not in lowered]
            if missing:
                raise ValueError(f"model draft missing fields: {', '.join(missing)}")
            return MathModelDraft(
                str(lowered["variables"]), str(lowered["constraints"]), str(lowered["objective"])
            )

        _, parsed = self._stage_with_reprompt(prompts.FORMALIZATION, prompt, validator)
        return parsed

    def stage_executive_compiler(self, draft: MathModelDraft) -> str:
        prompt = prompts.stage_prompt(
            prompts.EXECUTIVE_COMPILER,
            {
                "problem_description": self._description_with_data(),
                "comments_text": self.pool.latest(prompts.FORMALIZATION) or "",
                "format_example": prompts.exchange_format_example(),
            },
        )
        text = self._call(prompts.EXECUTIVE_COMPILER, [ChatMessage("user", prompt)])
        self.pool.append(prompts.EXECUTIVE_COMPILER, text)
        self.trace.events[-1]["pool_size"] = len(self.pool)
        return text

    def stage_supervisor_forward(self, candidate: str) -> str:
        prompt = prompts.stage_prompt(
            prompts.SUPERVISOR_FORWARD,
            {
                "comment_text": candidate,
                "code_example": prompts.exchange_format_example(),
                "attention": prompts.ATTENTION,
            },
        )
        text = self._call(prompts.SUPERVISOR_FORWARD, [ChatMessage("user", prompt)])
        self.pool.append(prompts.SUPERVISOR_FORWARD, text)
        self.trace.events[-1]["pool_size"] = len(self.pool)
        return text

    def stage_supervisor_backward(self, feedback: FeedbackDoc) -> str:
        prompt = prompts.stage_prompt(
            prompts.SUPERVISOR_BACKWARD,
            {
                "problem_description": self._description_with_data(),
                "previous_code": self.current_doc,
                "feedback": feedback.to_text(),
                "attention": prompts.ATTENTION,
            },
        )
        text = self._call(prompts.SUPERVISOR_BACKWARD, [ChatMessage("user", prompt)])
        self.pool.append(prompts.SUPERVISOR_BACKWARD, text)
        self.trace.events[-1]["pool_size"] = len(self.pool)
        return text

    # -- execution and reasoning ------------------------------------------

    def execute_candidate(self, doc_text: str) -> tuple[ModelIR | None, SolveResult]:
        """Parse, bind instance parameters, and solve a candidate document.

        A document that fails validation surfaces as an errored execution so
        the repair branch treats it like any other failed run."""
        self.current_doc = doc_text
        try:
            model = parse_model_document(doc_text, parameters=self.params)
        except ModelError as exc:
            self.last_parse_error = exc
            result = SolveResult(SolveStatus.ERROR, message=str(exc))
            self._event(
                "execute",
                status=result.status.value,
                error={"section": exc.section or "document", "message": str(exc)},
            )
            return None, result
        result = solve_milp(model, self.config.solver)
        self._event(
            "execute",
            status=result.status.value,
            objective=result.objective,
            assignment=result.assignment,
            message=result.message,
            pivots=result.stats.pivots,
            nodes=result.stats.nodes,
        )
        return model, result

    def expects_number(self) -> bool:
        return any(isinstance(e, (int, float)) and not isinstance(e, bool)
                   for e in self.instance.expected)

    def is_failed_execution(self, model: ModelIR | None, result: SolveResult) -> bool:
        if model is None or result.status is SolveStatus.ERROR:
            return True
        if result.status in (SolveStatus.INFEASIBLE, SolveStatus.UNBOUNDED):
            return self.expects_number()
        return False

    def reasoner_error(self, model: ModelIR | None, result: SolveResult) -> FeedbackDoc:
        failure = self.last_parse_error if model is None else result
        feedback = diagnose_failure(failure)
        self._event(
            "reasoner",
            mode="syntax",
            feedback=feedback.to_text(),
            feedback_entries=feedback.to_json(),
            pool_size=len(self.pool),
        )
        self.pool.append(prompts.REASONER, feedback.to_text())
        self.trace.events[-1]["pool_size"] = len(self.pool)
        return feedback

    def reasoner_counterfactual(
        self, model: ModelIR, draft: MathModelDraft | None, result: SolveResult
    ) -> tuple[CounterfactualReport, FeedbackDoc | None]:
        eps = self.config.solver.feasibility_eps
        reference, n_facts = build_reference_model(model, draft, self.params)
        checks = derive_checks(reference, eps)
        report = analyze(checks, result, eps)
        feedback: FeedbackDoc | None = None
        if report.solution_valid_without_changes:
            pool_text = "Counterfactual analysis found no needed modifications."
        else:
            feedback = report_to_feedback(report)
            if self.config.llm_reasoner_enabled:
                extra = self._llm_reasoner_pass(result)
                if extra:
                    feedback = FeedbackDoc(feedback.entries + (("Reasoner", extra),))
            pool_text = feedback.to_text()
        self._event(
            "reasoner",
            mode="counterfactual",
            fact_constraints=n_facts,
            report=report.to_json(),
            feedback=None if feedback is None else feedback.to_text(),
            pool_size=len(self.pool),
        )
        self.pool.append(prompts.REASONER, pool_text)
        self.trace.events[-1]["pool_size"] = len(self.pool)
        return report, feedback

    def _llm_reasoner_pass(self, result: SolveResult) -> str | None:
        prompt = prompts.stage_prompt(
            prompts.REASONER,
            {
                "problem_description": self._description_with_data(),
                "code_example": self.current_doc,
                "input_content": json.dumps(
                    {"objective": result.objective, "assignment": result.assignment},
                    sort_keys=True,
                ),
            },
        )
        text = self._call(prompts.REASONER, [ChatMessage("user", prompt)]).strip()
        if not text or "NO DISCREPANCIES" in text.upper():
            return None
        return text


def solve_problem(
    problem: ProblemInput,
    instance: ProblemInstance,
    config: RunConfig,
    client: ChatClient,
    instance_index: int = 0,
) -> RunOutcome:
    """Run the full pipeline on one problem instance; never raises.

    All failures are folded into the outcome classification with a complete
    trace of stages, executions, reports, and repair counts."""
    run = _Run(problem, instance, config, client, instance_index)
    model: ModelIR | None = None
    result: SolveResult | None = None
    executes: list[SolveResult] = []
    model_ever = False
    syntax_repairs = 0
    cf_repairs = 0
    try:
        params = run.stage_semantic_encoder()
        draft = run.stage_formalization(params)
        candidate = run.stage_executive_compiler(draft)
        doc_text = run.stage_supervisor_forward(candidate)
        model, result = run.execute_candidate(doc_text)
        executes.append(result)
        model_ever = model_ever or model is not None

        while (
            run.is_failed_execution(model, result)
            and syntax_repairs < config.max_syntax_repairs
        ):
            feedback = run.reasoner_error(model, result)
            new_doc = run.stage_supervisor_backward(feedback)
            model, result = run.execute_candidate(new_doc)
            executes.append(result)
            model_ever = model_ever or model is not None
            syntax_repairs += 1

        if model is not None and result.is_optimal:
            report, feedback = run.reasoner_counterfactual(model, draft, result)
            while feedback is not None and cf_repairs < config.max_cf_repairs:
                new_doc = run.stage_supervisor_backward(feedback)
                revised_model, revised_result = run.execute_candidate(new_doc)
                executes.append(revised_result)
                model_ever = model_ever or revised_model is not None
                cf_repairs += 1
                if revised_model is None or not revised_result.is_optimal:
                    run.note("revised model failed to execute; keeping the previous solution")
                    break
                model, result = revised_model, revised_result
                report, feedback = run.reasoner_counterfactual(model, draft, result)
    except StageParseError as exc:
        run.note(f"stage failure: {exc}")
    except (FixtureMissError, ScriptExhaustedError, TransportError) as exc:
        run.note(f"client failure: {exc}")

    final = result
    classification = classify(model_ever, executes, final, instance.expected, model)

    trace = run.trace
    trace.classification = classification.value
    trace.repairs = {"syntax": syntax_repairs, "counterfactual": cf_repairs}
    if final is not None:
        trace.final = {
            "status": final.status.value,
            "objective": final.objective,
            "assignment": final.assignment,
        }
    units = count_transcript_units(e for e in trace.events if e["kind"] == "stage")
    trace.transcript_units = {"per_stage": units.per_stage, "total": units.total}
    return RunOutcome(classification, final, model, (syntax_repairs, cf_repairs), trace)


def stage_sequence(trace: RunTrace) -> list[str]:
    """Compressed stage walk of a trace, for order assertions and narration.

    Consecutive attempts of the same chat stage collapse into one element;
    execute events map to "Execute" and reasoner events to "ReasonerErr" or
    "ReasonerCF" by mode."""
    sequence: list[str] = []
    for event in trace.events:
        if event["kind"] == "stage":
            label = event["stage"]
        elif event["kind"] == "execute":
            label = "Execute"
        elif event["kind"] == "reasoner":
            label = "ReasonerErr" if event["mode"] == "syntax" else "ReasonerCF"
        else:
            continue
        if not (sequence and sequence[-1] == label and event["kind"] == "stage"):
            sequence.append(label)
    return sequence


def transcript_units_of(trace: RunTrace) -> TranscriptUnits:
    units = TranscriptUnits()
    units.per_stage = dict(trace.transcript_units.get("per_stage", {}))
    units.total = trace.transcript_units.get("total", 0)
    return units
