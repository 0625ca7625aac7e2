"""Chat-completion clients: live HTTP, recorded-fixture replay, and scripted.

Fixture keys are (stage name, problem id, attempt index); the store persists
one JSON file per problem mapping ``"<stage>/<attempt>"`` to the recorded
response content, so repair-loop calls to the same stage replay distinct
fixtures.
"""

from __future__ import annotations

import json
import os
import threading
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Protocol

import requests

from .errors import (
    FixtureMissError,
    ScriptExhaustedError,
    StorageWriteError,
    TransportError,
)

FixtureKey = tuple[str, str, int]

DEFAULT_MODEL_ID = "gpt-3.5-turbo"
DEFAULT_BASE_URL = "https://api.openai.com/v1"
API_KEY_ENV = "ORMIND_API_KEY"

MAX_RETRIES = 3
BACKOFF_BASE = 0.5  # seconds; doubles per retry


@dataclass(frozen=True)
class ChatMessage:
    role: str  # "system" | "user" | "assistant"
    content: str


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    temperature: float
    messages: tuple[ChatMessage, ...]

    def __post_init__(self):
        if not self.messages:
            raise ValueError("request needs at least one message")
        if not (0.0 <= self.temperature <= 2.0):
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")


@dataclass(frozen=True)
class Usage:
    prompt_units: int
    completion_units: int


@dataclass(frozen=True)
class ChatResponse:
    content: str
    usage: Usage | None = None
    latency: float = 0.0
    retries: int = 0


class ChatClient(Protocol):
    def complete(self, request: ChatRequest, key: FixtureKey | None = None) -> ChatResponse:
        ...


class ScriptedClient:
    """Returns queued responses in order; raises once the script runs out."""

    def __init__(self, responses: Iterable[str]):
        self._responses = list(responses)
        self._lock = threading.Lock()
        self.requests: list[ChatRequest] = []

    def complete(self, request: ChatRequest, key: FixtureKey | None = None) -> ChatResponse:
        with self._lock:
            self.requests.append(request)
            if not self._responses:
                raise ScriptExhaustedError("scripted client has no responses left")
            content = self._responses.pop(0)
        return ChatResponse(content=content)


class FixtureStore:
    """In-memory fixture map with per-problem JSON persistence."""

    def __init__(self):
        self.entries: dict[FixtureKey, str] = {}
        self._lock = threading.Lock()

    @classmethod
    def load_dir(cls, path: str | Path) -> "FixtureStore":
        store = cls()
        root = Path(path)
        for file in sorted(root.glob("*.json")):
            store.load_problem_file(file)
        return store

    def load_problem_file(self, file: Path) -> None:
        problem_id = file.stem
        data = json.loads(file.read_text(encoding="utf-8"))
        for slot, entry in data.items():
            stage, _, attempt = slot.rpartition("/")
            self.entries[(stage, problem_id, int(attempt))] = entry["content"]

    def get(self, key: FixtureKey) -> str:
        try:
            return self.entries[key]
        except KeyError:
            raise FixtureMissError(key) from None

    def add(self, key: FixtureKey, content: str) -> None:
        with self._lock:
            if key in self.entries:
                warnings.warn(f"overwriting fixture entry {key!r}", stacklevel=2)
            self.entries[key] = content

    def problem_ids(self) -> set[str]:
        return {pid for (_, pid, _) in self.entries}

    def save_problem(self, problem_id: str, directory: str | Path) -> Path:
        """Atomically write one problem's fixture file (temp file + rename)."""
        directory = Path(directory)
        payload = {
            f"{stage}/{attempt}": {"content": content}
            for (stage, pid, attempt), content in sorted(self.entries.items())
            if pid == problem_id
        }
        target = directory / f"{problem_id}.json"
        try:
            directory.mkdir(parents=True, exist_ok=True)
            tmp = target.with_suffix(".json.tmp")
            tmp.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
            os.replace(tmp, target)
        except OSError as exc:
            raise StorageWriteError(f"cannot write fixture file {target}: {exc}") from exc
        return target


class ReplayClient:
    """Serves recorded responses; every call must carry a fixture key."""

    def __init__(self, store: FixtureStore):
        self.store = store

    def complete(self, request: ChatRequest, key: FixtureKey | None = None) -> ChatResponse:
        if key is None:
            raise FixtureMissError(("<missing>", "<missing>", -1))
        return ChatResponse(content=self.store.get(key))


class LiveClient:
    """OpenAI-compatible chat-completions transport with bounded retries.

    Retries (at most ``max_retries``, exponential backoff) apply only to
    HTTP 429, 5xx, and transport-level timeouts/connection errors.
    """

    def __init__(
        self,
        base_url: str = DEFAULT_BASE_URL,
        api_key: str | None = None,
        timeout: float = 30.0,
        max_retries: int = MAX_RETRIES,
        backoff_base: float = BACKOFF_BASE,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self._session = session or requests.Session()

    def complete(self, request: ChatRequest, key: FixtureKey | None = None) -> ChatResponse:
        url = f"{self.base_url}/chat/completions"
        body = {
            "model": request.model_id,
            "temperature": request.temperature,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
        }
        headers = {"Authorization": f"Bearer {self.api_key}"}
        start = time.perf_counter()
        attempts = 0
        last_status: int | None = None
        last_body = ""
        while attempts <= self.max_retries:
            if attempts:
                time.sleep(self.backoff_base * 2 ** (attempts - 1))
            attempts += 1
            try:
                resp = self._session.post(url, json=body, headers=headers, timeout=self.timeout)
            except (requests.Timeout, requests.ConnectionError) as exc:
                last_status, last_body = None, str(exc)
                continue
            if resp.status_code == 429 or 500 <= resp.status_code < 600:
                last_status, last_body = resp.status_code, resp.text
                continue
            if resp.status_code != 200:
                raise TransportError(resp.status_code, resp.text)
            return self._parse(resp, start, retries=attempts - 1)
        raise TransportError(last_status, last_body)

    @staticmethod
    def _parse(resp: requests.Response, start: float, retries: int) -> ChatResponse:
        try:
            payload = resp.json()
            content = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(resp.status_code, f"malformed response body: {exc}") from exc
        usage = None
        raw_usage = payload.get("usage")
        if isinstance(raw_usage, dict):
            usage = Usage(
                prompt_units=int(raw_usage.get("prompt_tokens", 0)),
                completion_units=int(raw_usage.get("completion_tokens", 0)),
            )
        return ChatResponse(
            content=content,
            usage=usage,
            latency=time.perf_counter() - start,
            retries=retries,
        )


class RecordingClient:
    """Wraps a live client, persisting every (key, response) for later replay."""

    def __init__(self, inner: ChatClient, directory: str | Path):
        self.inner = inner
        self.directory = Path(directory)
        self.store = FixtureStore()

    def complete(self, request: ChatRequest, key: FixtureKey | None = None) -> ChatResponse:
        response = self.inner.complete(request, key=key)
        if key is not None:
            self.store.add(key, response.content)
            self.store.save_problem(key[1], self.directory)
        return response


@dataclass
class TranscriptUnits:
    per_stage: dict[str, int] = field(default_factory=dict)
    total: int = 0


def _whitespace_units(texts: Iterable[str]) -> int:
    return sum(len(t.split()) for t in texts)


def count_transcript_units(stage_events: Iterable[Mapping]) -> TranscriptUnits:
    """Token accounting over a run's stage events.

    Uses recorded usage when present; otherwise falls back to a
    whitespace-delimited count of prompt plus completion text.
    """
    result = TranscriptUnits()
    for event in stage_events:
        usage = event.get("usage")
        if usage:
            units = int(usage.get("prompt_units", 0)) + int(usage.get("completion_units", 0))
        else:
            prompts = [m["content"] for m in event.get("messages", [])]
            units = _whitespace_units(prompts + [event.get("response", "")])
        stage = event.get("stage", "?")
        result.per_stage[stage] = result.per_stage.get(stage, 0) + units
        result.total += units
    return result
