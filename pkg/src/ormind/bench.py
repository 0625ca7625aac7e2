"""Dataset loading, benchmark runs, metric aggregation, and report emission.

Aggregates are exact fractions over the problem count: the success rate,
model-formulation failure rate, implementation-execution failure rate, and
wrong-answer rate always sum to one.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

from .errors import EmptyDatasetError
from .llm import ChatClient
from .pipeline import (
    Classification,
    ParamSpec,
    ProblemInput,
    ProblemInstance,
    RunConfig,
    RunOutcome,
    solve_problem,
)


@dataclass(frozen=True)
class LoadError:
    path: str
    message: str


def _normalize_instance(raw: object, index: int) -> ProblemInstance:
    if not isinstance(raw, dict):
        raise ValueError(f"instance {index} is not an object")
    if "input" in raw:
        inputs = raw["input"]
        if not isinstance(inputs, dict):
            raise ValueError(f"instance {index} 'input' is not an object")
        expected = raw.get("output", [])
    else:
        # industrial-format instances inline the parameter values
        inputs = {k: v for k, v in raw.items() if k != "output"}
        expected = raw.get("output", [])
    if not isinstance(expected, list):
        raise ValueError(f"instance {index} 'output' is not a list")
    return ProblemInstance(input=dict(inputs), expected=tuple(expected))


def _normalize_problem(data: object, default_id: str) -> ProblemInput:
    if not isinstance(data, dict):
        raise ValueError("problem file must contain a JSON object")
    description = data.get("description")
    if not isinstance(description, str) or not description.strip():
        raise ValueError("problem has no description")
    parameters = []
    for entry in data.get("parameters", []) or []:
        if not isinstance(entry, dict) or "symbol" not in entry:
            raise ValueError("parameter entries need a 'symbol'")
        parameters.append(
            ParamSpec(
                symbol=str(entry["symbol"]),
                definition=str(entry.get("definition", "")),
                shape=tuple(entry.get("shape", []) or []),
            )
        )
    raw_instances = data.get("instances", [])
    if not isinstance(raw_instances, list):
        raise ValueError("'instances' must be a list")
    instances = [_normalize_instance(raw, i) for i, raw in enumerate(raw_instances)]
    if not instances:
        instances = [ProblemInstance()]
    return ProblemInput(
        id=str(data.get("id") or default_id),
        description=description,
        parameters=tuple(parameters),
        instances=tuple(instances),
    )


def load_problems(path: str | Path) -> tuple[list[ProblemInput], list[LoadError]]:
    """Load a dataset directory (one JSON file per problem) or a single file
    (one problem object, or an array of them).  Malformed files are reported
    as LoadErrors rather than aborting the whole load."""
    path = Path(path)
    problems: list[ProblemInput] = []
    errors: list[LoadError] = []

    def load_file(file: Path) -> None:
        try:
            data = json.loads(file.read_text(encoding="utf-8"))
            if isinstance(data, list):
                for i, entry in enumerate(data):
                    problems.append(_normalize_problem(entry, f"{file.stem}-{i}"))
            else:
                problems.append(_normalize_problem(data, file.stem))
        except (ValueError, OSError) as exc:
            errors.append(LoadError(str(file), str(exc)))

    if path.is_dir():
        files = sorted(path.glob("*.json"))
        for file in files:
            load_file(file)
    elif path.is_file():
        load_file(path)
    else:
        raise EmptyDatasetError(f"dataset path {path} does not exist")
    if not problems:
        raise EmptyDatasetError(f"no problems could be loaded from {path}")
    problems.sort(key=lambda p: p.id)
    return problems, errors


@dataclass
class ProblemRow:
    id: str
    classification: str
    objective: float | None
    expected: list
    repairs: dict
    transcript_units: int
    wall_time: float
    instances: list[dict] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class BenchReport:
    rows: list[ProblemRow]
    counts: dict[str, int]
    n: int

    @property
    def sr(self) -> Fraction:
        return Fraction(self.counts.get(Classification.SUCCESS.value, 0), self.n)

    @property
    def mffr(self) -> Fraction:
        return Fraction(self.counts.get(Classification.FORMULATION_FAILURE.value, 0), self.n)

    @property
    def iefr(self) -> Fraction:
        return Fraction(self.counts.get(Classification.EXECUTION_FAILURE.value, 0), self.n)

    @property
    def wrong_answer_rate(self) -> Fraction:
        return Fraction(self.counts.get(Classification.WRONG_ANSWER.value, 0), self.n)

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "counts": dict(self.counts),
            "aggregates": {
                "SR": float(self.sr),
                "MFFR": float(self.mffr),
                "IEFR": float(self.iefr),
                "WrongAnswerRate": float(self.wrong_answer_rate),
            },
            "rows": [row.to_json_dict() for row in self.rows],
        }


def _conjunction(outcomes: Sequence[RunOutcome]) -> Classification:
    """A problem succeeds only when every instance succeeds; otherwise it
    takes the first failing instance's classification."""
    for outcome in outcomes:
        if outcome.classification is not Classification.SUCCESS:
            return outcome.classification
    return Classification.SUCCESS


def run_problem(
    problem: ProblemInput, config: RunConfig, client: ChatClient
) -> tuple[ProblemRow, list[RunOutcome]]:
    start = time.perf_counter()
    outcomes = [
        solve_problem(problem, instance, config, client, instance_index=i)
        for i, instance in enumerate(problem.instances)
    ]
    wall = time.perf_counter() - start
    classification = _conjunction(outcomes)
    first = outcomes[0]
    row = ProblemRow(
        id=problem.id,
        classification=classification.value,
        objective=None if first.final is None else first.final.objective,
        expected=list(problem.instances[0].expected),
        repairs={
            "syntax": sum(o.repairs[0] for o in outcomes),
            "counterfactual": sum(o.repairs[1] for o in outcomes),
        },
        transcript_units=sum(o.trace.transcript_units["total"] for o in outcomes),
        wall_time=wall,
        instances=[
            {
                "index": i,
                "classification": o.classification.value,
                "status": None if o.final is None else o.final.status.value,
                "objective": None if o.final is None else o.final.objective,
                "expected": list(problem.instances[i].expected),
                "repairs": {"syntax": o.repairs[0], "counterfactual": o.repairs[1]},
            }
            for i, o in enumerate(outcomes)
        ],
    )
    return row, outcomes


def run_benchmark(
    problems: Sequence[ProblemInput],
    config: RunConfig,
    client: ChatClient,
    workers: int = 4,
) -> BenchReport:
    """Classify every problem; report ordering is by id regardless of the
    completion order of the worker pool."""
    if not problems:
        raise EmptyDatasetError("benchmark needs at least one problem")
    rows: list[ProblemRow] = []
    if workers <= 1:
        for problem in problems:
            rows.append(run_problem(problem, config, client)[0])
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_problem, p, config, client) for p in problems]
            rows = [f.result()[0] for f in futures]
    rows.sort(key=lambda r: r.id)
    counts: dict[str, int] = {c.value: 0 for c in Classification}
    for row in rows:
        counts[row.classification] += 1
    return BenchReport(rows=rows, counts=counts, n=len(rows))


@dataclass
class SweepResult:
    temps: tuple[float, ...]
    reports: dict[float, BenchReport]

    def to_json_dict(self) -> dict:
        return {
            "temps": list(self.temps),
            "reports": {str(t): self.reports[t].to_json_dict() for t in self.temps},
        }


def sweep_temperature(
    problems: Sequence[ProblemInput],
    temps: Sequence[float],
    config: RunConfig,
    client_for_temp: Callable[[float], ChatClient],
    workers: int = 4,
) -> SweepResult:
    """One benchmark run per temperature; temperatures must strictly increase."""
    temps = tuple(float(t) for t in temps)
    if not temps:
        raise ValueError("no temperatures given")
    if any(b <= a for a, b in zip(temps, temps[1:])):
        raise ValueError("temperatures must be strictly increasing")
    reports: dict[float, BenchReport] = {}
    for t in temps:
        run_config = dataclasses.replace(config, temperature=t)
        reports[t] = run_benchmark(problems, run_config, client_for_temp(t), workers=workers)
    return SweepResult(temps=temps, reports=reports)


def _aggregate_line(report: BenchReport) -> str:
    return (
        f"{float(report.sr):.1%} | {float(report.mffr):.1%} | "
        f"{float(report.iefr):.1%} | {float(report.wrong_answer_rate):.1%}"
    )


def render_table(report: BenchReport) -> str:
    headers = ["id", "classification", "objective", "expected", "repairs", "units", "time_s"]
    body = []
    for row in report.rows:
        body.append(
            [
                row.id,
                row.classification,
                "-" if row.objective is None else f"{row.objective:g}",
                json.dumps(row.expected),
                f"{row.repairs['syntax']}+{row.repairs['counterfactual']}",
                str(row.transcript_units),
                f"{row.wall_time:.3f}",
            ]
        )
    widths = [max(len(headers[i]), *(len(r[i]) for r in body)) for i in range(len(headers))]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
        "  ".join("-" * w for w in widths),
    ]
    lines += ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(r)) for r in body]
    lines.append("")
    lines.append("SR | MFFR | IEFR | WrongAnswer")
    lines.append(_aggregate_line(report))
    return "\n".join(lines)


def render_csv(report: BenchReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(
        ["id", "classification", "objective", "expected", "syntax_repairs",
         "cf_repairs", "transcript_units", "wall_time_s"]
    )
    for row in report.rows:
        writer.writerow(
            [
                row.id,
                row.classification,
                "" if row.objective is None else repr(row.objective),
                json.dumps(row.expected),
                row.repairs["syntax"],
                row.repairs["counterfactual"],
                row.transcript_units,
                f"{row.wall_time:.6f}",
            ]
        )
    return buffer.getvalue()


def emit_report(report: BenchReport, fmt: str = "json") -> str:
    """Serialize a report: machine JSON, aligned text table, or CSV rows."""
    if fmt == "json":
        return json.dumps(report.to_json_dict(), indent=2)
    if fmt == "table":
        return render_table(report)
    if fmt == "csv":
        return render_csv(report)
    raise ValueError(f"unknown report format {fmt!r}")


def render_sweep_table(sweep: SweepResult) -> str:
    lines = ["temp   SR | MFFR | IEFR | WrongAnswer"]
    for t in sweep.temps:
        lines.append(f"{t:<6g} {_aggregate_line(sweep.reports[t])}")
    return "\n".join(lines)


def render_sweep_csv(sweep: SweepResult) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(["temperature", "SR", "MFFR", "IEFR", "WrongAnswerRate"])
    for t in sweep.temps:
        report = sweep.reports[t]
        writer.writerow(
            [t, float(report.sr), float(report.mffr), float(report.iefr),
             float(report.wrong_answer_rate)]
        )
    return buffer.getvalue()


def write_atomic(path: str | Path, text: str) -> None:
    """Write via temp file + rename; interrupted writes never leave truncated output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)
