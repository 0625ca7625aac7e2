"""Command-line entry point.

Subcommands: solve one problem, bench a dataset, sweep temperatures, record
live responses as replay fixtures, and inspect a saved run trace.  Exit codes
for ``solve`` follow the run classification (0 success, 1 wrong answer,
2 formulation failure, 3 execution failure); usage errors exit 64 and
data errors exit 65.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .bench import (
    emit_report,
    load_problems,
    render_csv,
    render_sweep_csv,
    render_sweep_table,
    render_table,
    run_benchmark,
    run_problem,
    sweep_temperature,
    write_atomic,
)
from .errors import EmptyDatasetError, OrmindError, TransportError
from .llm import (
    API_KEY_ENV,
    DEFAULT_BASE_URL,
    DEFAULT_MODEL_ID,
    FixtureStore,
    LiveClient,
    RecordingClient,
    ReplayClient,
)
from .pipeline import Classification, RunConfig, solve_problem
from .solver import SolverOptions

EXIT_OK = 0
EXIT_USAGE = 64
EXIT_DATA = 65

_CLASSIFICATION_EXIT = {
    Classification.SUCCESS: 0,
    Classification.WRONG_ANSWER: 1,
    Classification.FORMULATION_FAILURE: 2,
    Classification.EXECUTION_FAILURE: 3,
}

_STAGE_TITLES = {
    "SemanticEncoder": "Semantic Encoder",
    "Formalization": "Formalization Thinking",
    "ExecutiveCompiler": "Executive Compiler",
    "SupervisorForward": "Metacognitive Supervisor (forward)",
    "SupervisorBackward": "Metacognitive Supervisor (backward)",
    "Reasoner": "System 2 Reasoner",
}


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ormind",
        description="Translate word problems into linear models, solve them exactly, "
        "and validate the solutions counterfactually.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_client_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--fixtures", help="directory of recorded stage fixtures")
        mode = p.add_mutually_exclusive_group()
        mode.add_argument("--live", action="store_true", help="force live HTTP calls")
        mode.add_argument("--replay", action="store_true", help="force fixture replay")
        p.add_argument("--base-url", default=DEFAULT_BASE_URL)
        p.add_argument("--model", default=DEFAULT_MODEL_ID)
        p.add_argument("--temperature", type=float, default=0.0)
        p.add_argument("--llm-reasoner", action="store_true",
                       help="add the LLM reasoning pass on top of the deterministic checks")

    def add_solver_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--pivot-limit", type=int, default=50_000)
        p.add_argument("--node-limit", type=int, default=100_000)
        p.add_argument("--eps", type=float, default=1e-2,
                       help="feasibility epsilon for checks and reports")
        p.add_argument("--time-limit", type=float, default=10.0,
                       help="seconds per solver call")

    p_solve = sub.add_parser("solve", help="run the pipeline on one problem file")
    p_solve.add_argument("problem", help="path to a problem JSON file")
    p_solve.add_argument("--trace", help="path for the run trace JSON")
    add_client_flags(p_solve)
    add_solver_flags(p_solve)

    p_bench = sub.add_parser("bench", help="run a dataset and report SR/MFFR/IEFR")
    p_bench.add_argument("dataset", help="dataset directory or combined file")
    p_bench.add_argument("--out", help="report JSON path; CSV and figure land beside it")
    p_bench.add_argument("--table", action="store_true", help="print the text table")
    p_bench.add_argument("--workers", type=int, default=4)
    add_client_flags(p_bench)
    add_solver_flags(p_bench)

    p_sweep = sub.add_parser("sweep", help="benchmark across a temperature schedule")
    p_sweep.add_argument("dataset")
    p_sweep.add_argument("--temps", required=True, help="comma-separated, increasing")
    p_sweep.add_argument("--out", help="sweep JSON path; CSV and figure land beside it")
    p_sweep.add_argument("--workers", type=int, default=4)
    add_client_flags(p_sweep)
    add_solver_flags(p_sweep)

    p_record = sub.add_parser("record", help="run live and save responses as fixtures")
    p_record.add_argument("dataset")
    p_record.add_argument("--fixtures", required=True, help="output fixture directory")
    p_record.add_argument("--base-url", default=DEFAULT_BASE_URL)
    p_record.add_argument("--model", default=DEFAULT_MODEL_ID)
    p_record.add_argument("--temperature", type=float, default=0.0)
    p_record.add_argument("--llm-reasoner", action="store_true")
    add_solver_flags(p_record)

    p_inspect = sub.add_parser("inspect", help="narrate a saved run trace")
    p_inspect.add_argument("trace", help="trace JSON written by 'ormind solve'")

    return parser


def _run_config(args) -> RunConfig:
    return RunConfig(
        temperature=args.temperature,
        model_id=args.model,
        llm_reasoner_enabled=getattr(args, "llm_reasoner", False),
        solver=SolverOptions(
            pivot_limit=args.pivot_limit,
            node_limit=args.node_limit,
            feasibility_eps=args.eps,
            time_limit=args.time_limit,
        ),
    )


def _resolve_client(args):
    """Replay when a fixtures directory is available, live otherwise."""
    fixtures = getattr(args, "fixtures", None)
    use_replay = args.replay or (fixtures is not None and not args.live)
    if use_replay:
        if not fixtures or not Path(fixtures).is_dir():
            raise UsageError(f"replay mode needs an existing fixtures directory, got {fixtures!r}")
        return ReplayClient(FixtureStore.load_dir(fixtures))
    api_key = os.environ.get(API_KEY_ENV, "")
    if not api_key:
        raise UsageError(f"live mode needs the {API_KEY_ENV} environment variable")
    return LiveClient(base_url=args.base_url, api_key=api_key)


def cmd_solve(args) -> int:
    problems, errors = load_problems(args.problem)
    for err in errors:
        print(f"warning: {err.path}: {err.message}", file=sys.stderr)
    if len(problems) != 1:
        raise UsageError("solve expects exactly one problem in the file")
    problem = problems[0]
    client = _resolve_client(args)
    config = _run_config(args)

    outcomes = []
    print(f"problem: {problem.id}")
    for i, instance in enumerate(problem.instances):
        outcome = solve_problem(problem, instance, config, client, instance_index=i)
        outcomes.append(outcome)
        print(f"instance {i}: {outcome.classification.value}")
        if outcome.final is not None:
            print(f"  status: {outcome.final.status.value}")
            if outcome.final.objective is not None:
                print(f"  objective: {outcome.final.objective:g}")
            if outcome.final.assignment:
                parts = " ".join(f"{k}={v:g}" for k, v in outcome.final.assignment.items())
                print(f"  assignment: {parts}")
        print(f"  repairs: syntax={outcome.repairs[0]} counterfactual={outcome.repairs[1]}")

    worst = next(
        (o.classification for o in outcomes if o.classification is not Classification.SUCCESS),
        Classification.SUCCESS,
    )
    print(f"classification: {worst.value}")

    trace_path = Path(args.trace) if args.trace else Path(f"{problem.id}.trace.json")
    payload = {
        "problem_id": problem.id,
        "classification": worst.value,
        "runs": [o.trace.to_json_dict() for o in outcomes],
    }
    write_atomic(trace_path, json.dumps(payload, indent=2) + "\n")
    print(f"trace: {trace_path}")
    return _CLASSIFICATION_EXIT[worst]


def _write_report_files(report, out: str) -> None:
    from .figures import render_report_figure

    out_path = Path(out)
    write_atomic(out_path, emit_report(report, "json") + "\n")
    write_atomic(out_path.with_suffix(".csv"), render_csv(report))
    render_report_figure(report, out_path.with_suffix(".png"))
    print(f"report: {out_path} (+ .csv, .png)")


def cmd_bench(args) -> int:
    problems, errors = load_problems(args.dataset)
    for err in errors:
        print(f"warning: {err.path}: {err.message}", file=sys.stderr)
    client = _resolve_client(args)
    report = run_benchmark(problems, _run_config(args), client, workers=args.workers)
    if args.table:
        print(render_table(report))
    else:
        print(f"n={report.n}  SR={float(report.sr):.1%}  MFFR={float(report.mffr):.1%}  "
              f"IEFR={float(report.iefr):.1%}  WrongAnswer={float(report.wrong_answer_rate):.1%}")
    if args.out:
        _write_report_files(report, args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        temps = [float(t) for t in args.temps.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --temps value: {exc}") from exc
    problems, errors = load_problems(args.dataset)
    for err in errors:
        print(f"warning: {err.path}: {err.message}", file=sys.stderr)
    config = _run_config(args)
    fixtures = getattr(args, "fixtures", None)

    def client_for_temp(t: float):
        # per-temperature fixture subdirectories (t0.0, t0.7, ...) when present
        if fixtures and not args.live:
            sub = Path(fixtures) / f"t{t:g}"
            scoped_args = argparse.Namespace(**vars(args))
            scoped_args.fixtures = str(sub) if sub.is_dir() else fixtures
            return _resolve_client(scoped_args)
        return _resolve_client(args)

    try:
        sweep = sweep_temperature(problems, temps, config, client_for_temp, workers=args.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    print(render_sweep_table(sweep))
    if args.out:
        from .figures import render_sweep_figure

        out_path = Path(args.out)
        write_atomic(out_path, json.dumps(sweep.to_json_dict(), indent=2) + "\n")
        write_atomic(out_path.with_suffix(".csv"), render_sweep_csv(sweep))
        render_sweep_figure(sweep, out_path.with_suffix(".png"))
        print(f"sweep: {out_path} (+ .csv, .png)")
    return EXIT_OK


def cmd_record(args) -> int:
    api_key = os.environ.get(API_KEY_ENV, "")
    if not api_key:
        raise UsageError(f"record needs the {API_KEY_ENV} environment variable")
    problems, errors = load_problems(args.dataset)
    for err in errors:
        print(f"warning: {err.path}: {err.message}", file=sys.stderr)
    config = RunConfig(
        temperature=args.temperature,
        model_id=args.model,
        llm_reasoner_enabled=getattr(args, "llm_reasoner", False),
        solver=SolverOptions(
            pivot_limit=args.pivot_limit,
            node_limit=args.node_limit,
            feasibility_eps=args.eps,
            time_limit=args.time_limit,
        ),
    )
    live = LiveClient(base_url=args.base_url, api_key=api_key)
    client = RecordingClient(live, args.fixtures)
    recorded = 0
    for problem in problems:
        try:
            row, _ = run_problem(problem, config, client)
        except TransportError as exc:
            print(f"{problem.id}: transport failure: {exc}", file=sys.stderr)
            continue
        keys = [k for k in client.store.entries if k[1] == problem.id]
        recorded += len(keys)
        print(f"{problem.id}: {row.classification} ({len(keys)} fixture entries)")
    print(f"recorded {recorded} entries under {args.fixtures}")
    return EXIT_OK


def _excerpt(text: str, limit: int = 160) -> str:
    flat = " ".join(text.split())
    return flat if len(flat) <= limit else flat[: limit - 3] + "..."


def _narrate_run(run: dict) -> None:
    print(f"-- instance {run.get('instance_index', 0)}: "
          f"{run.get('classification', '?')} "
          f"(repairs: syntax={run['repairs']['syntax']}, "
          f"counterfactual={run['repairs']['counterfactual']})")
    step = 0
    for event in run["events"]:
        kind = event["kind"]
        if kind == "stage":
            step += 1
            title = _STAGE_TITLES.get(event["stage"], event["stage"])
            print(f"[{step}] {title} (attempt {event['attempt']})")
            print(f"    -> {_excerpt(event.get('response', ''))}")
        elif kind == "execute":
            step += 1
            print(f"[{step}] Execute")
            if event.get("error"):
                print(f"    status={event['status']} "
                      f"section={event['error']['section']} "
                      f"error: {_excerpt(event['error']['message'])}")
            else:
                objective = event.get("objective")
                obj_text = "-" if objective is None else f"{objective:g}"
                assignment = event.get("assignment") or {}
                parts = " ".join(f"{k}={v:g}" for k, v in assignment.items())
                print(f"    status={event['status']} objective={obj_text} {parts}")
                print(f"    pivots={event.get('pivots', 0)} nodes={event.get('nodes', 0)}")
        elif kind == "reasoner":
            step += 1
            mode = "syntax error analysis" if event["mode"] == "syntax" else "counterfactual"
            print(f"[{step}] System 2 Reasoner ({mode})")
            feedback = event.get("feedback")
            if feedback:
                for line in feedback.splitlines():
                    print(f"    {line}")
            else:
                print("    no modifications needed")
        elif kind == "note":
            print(f"    note: {event['text']}")
    final = run.get("final")
    if final:
        print(f"    final: {final['status']} objective="
              f"{'-' if final['objective'] is None else format(final['objective'], 'g')}")


def cmd_inspect(args) -> int:
    path = Path(args.trace)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
        if not isinstance(payload, dict) or "runs" not in payload:
            raise ValueError("not a run trace (missing 'runs')")
        runs = payload["runs"]
        if not isinstance(runs, list) or not runs:
            raise ValueError("trace contains no runs")
        print(f"problem: {payload.get('problem_id', '?')}  "
              f"classification: {payload.get('classification', '?')}")
        for run in runs:
            _narrate_run(run)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: cannot inspect {path}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    handlers = {
        "solve": cmd_solve,
        "bench": cmd_bench,
        "sweep": cmd_sweep,
        "record": cmd_record,
        "inspect": cmd_inspect,
    }
    try:
        return handlers[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EmptyDatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OrmindError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def console_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_entry()
