import http.server
import json
import threading
from pathlib import Path

import pytest

from ormind.llm import FixtureStore, ReplayClient
from ormind.model import (
    LinExpr,
    ModelIR,
    Objective,
    ObjSense,
    VariableDef,
    VarKind,
)
from ormind.parsing import parse_constraint, parse_linear_expr

REPO_ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = REPO_ROOT / "data"
PROBLEMS_DIR = DATA_DIR / "problems"
FIXTURES_DIR = DATA_DIR / "fixtures"


@pytest.fixture(scope="session")
def problems_dir() -> Path:
    return PROBLEMS_DIR


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES_DIR


@pytest.fixture(scope="session")
def fixture_store() -> FixtureStore:
    return FixtureStore.load_dir(FIXTURES_DIR)


@pytest.fixture()
def replay_client(fixture_store) -> ReplayClient:
    return ReplayClient(fixture_store)


def build_pharmacy_model(include_ratio: bool = True) -> ModelIR:
    """The pharmacy case-study model with bounds carried on the variables."""
    names = frozenset({"painkillers", "sleeping_pills"})
    constraints = [
        parse_constraint("10*painkillers + 6*sleeping_pills <= 3000", names, name="morphine"),
    ]
    if include_ratio:
        constraints.append(
            parse_constraint(
                "sleeping_pills >= 0.7*(painkillers + sleeping_pills)", names, name="ratio"
            )
        )
    return ModelIR(
        (
            VariableDef("painkillers", VarKind.INTEGER, 50.0),
            VariableDef("sleeping_pills", VarKind.INTEGER, 0.0),
        ),
        tuple(constraints),
        Objective(ObjSense.MIN, parse_linear_expr("3*painkillers + 5*sleeping_pills", names)),
    )


@pytest.fixture()
def pharmacy_model() -> ModelIR:
    return build_pharmacy_model()


@pytest.fixture()
def pharmacy_faulty_model() -> ModelIR:
    return build_pharmacy_model(include_ratio=False)


def build_two_constraint_example() -> ModelIR:
    """Two-resource toy model used in the counterfactual walkthroughs."""
    names = frozenset({"var1", "var2"})
    return ModelIR(
        (
            VariableDef("var1", VarKind.CONTINUOUS, 0.0),
            VariableDef("var2", VarKind.CONTINUOUS, 0.0),
        ),
        (
            parse_constraint("2*var1 + 3*var2 <= 100", names, name="c1"),
            parse_constraint("var1 + var2 <= 35", names, name="c2"),
        ),
        Objective(ObjSense.MAX, LinExpr({"var1": 3.0, "var2": 3.0})),
    )


class _StubState:
    def __init__(self, script, failures, include_usage):
        self.script = list(script)
        self.failures = list(failures)
        self.include_usage = include_usage
        self.requests: list[dict] = []
        self.lock = threading.Lock()


class _StubHandler(http.server.BaseHTTPRequestHandler):
    def do_POST(self):  # noqa: N802  (http.server API)
        state: _StubState = self.server.state  # type: ignore[attr-defined]
        length = int(self.headers.get("Content-Length", "0"))
        raw = self.rfile.read(length) if length else b"{}"
        with state.lock:
            try:
                state.requests.append(json.loads(raw))
            except json.JSONDecodeError:
                state.requests.append({})
            if state.failures:
                code = state.failures.pop(0)
                body = json.dumps({"error": {"message": "synthetic failure"}}).encode()
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)
                return
            if not state.script:
                content = "{}"
            else:
                content = state.script.pop(0)
        payload = {"choices": [{"message": {"role": "assistant", "content": content}}]}
        if state.include_usage:
            payload["usage"] = {
                "prompt_tokens": len(raw.split()),
                "completion_tokens": len(content.split()),
            }
        body = json.dumps(payload).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):  # silence request logging in test output
        pass


class StubLLMServer:
    """OpenAI-compatible endpoint serving scripted contents, with optional
    leading HTTP failures for retry tests."""

    def __init__(self, script=(), failures=(), include_usage=True):
        self.state = _StubState(script, failures, include_usage)
        self._server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
        self._server.state = self.state  # type: ignore[attr-defined]
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}/v1"

    def __enter__(self) -> "StubLLMServer":
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)


@pytest.fixture()
def stub_server_factory():
    servers = []

    def factory(script=(), failures=(), include_usage=True) -> StubLLMServer:
        server = StubLLMServer(script, failures, include_usage)
        server.__enter__()
        servers.append(server)
        return server

    yield factory
    for server in servers:
        server.__exit__()
