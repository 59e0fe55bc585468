"""Uniform access to the remote LLM services behind the three agent roles.

One gateway serves all roles with a dual-model assignment (the evaluator
never shares a model with the writer or ideator), bounded transport and
structured-output retries, and a deterministic record/replay mode so the
whole agent stack can be exercised offline from checked-in transcripts.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Protocol

import httpx

from .model import Origin
from .prompts import RenderedPrompt
from .provenance import emit_step

__all__ = [
    "Completion",
    "ConfigError",
    "GatewayError",
    "HTTPChatProvider",
    "LLMGateway",
    "Provider",
    "ProviderError",
    "ReplayExhausted",
    "RoleAssignment",
    "SamplingParams",
    "StructuredOutputError",
    "TokenBucket",
    "Transcript",
    "assign_models",
    "coarse_fingerprint",
    "extract_json",
    "prompt_fingerprint",
]

AGENT_ROLES = (Origin.IDEATOR, Origin.WRITER, Origin.EVALUATOR)

_WS_RE = re.compile(r"\s+")


class GatewayError(Exception):
    pass


class ConfigError(GatewayError):
    pass


class ProviderError(GatewayError):
    """A transport-level failure (network, auth, quota) from an LLM service."""

    def __init__(self, message: str, *, role: Origin | None = None, attempts: int = 1):
        super().__init__(message)
        self.role = role
        self.attempts = attempts


class ReplayExhausted(GatewayError):
    """Replay mode ran out of canned responses for a prompt."""


class StructuredOutputError(GatewayError):
    """The model never produced structured output passing the schema check."""

    def __init__(self, message: str, attempts: list[str]):
        super().__init__(message)
        self.attempts = attempts


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.3
    max_tokens: int = 2048


# Divergence for ideation; lower temperatures stabilize citation fidelity
# and JSON output for drafting and evaluation.
DEFAULT_PARAMS: dict[Origin, SamplingParams] = {
    Origin.IDEATOR: SamplingParams(temperature=0.7),
    Origin.WRITER: SamplingParams(temperature=0.3),
    Origin.EVALUATOR: SamplingParams(temperature=0.2),
}

DEFAULT_MODELS = {
    "ideator": "gpt-4.1",
    "writer": "gpt-4.1",
    "evaluator": "claude-3-7-sonnet",
}


@dataclass(frozen=True)
class RoleAssignment:
    """Model identifiers per role. The evaluator must run on a different
    service than the writer and ideator so it does not judge its own output."""

    ideator_model: str
    writer_model: str
    evaluator_model: str

    def __post_init__(self) -> None:
        if not (self.ideator_model and self.writer_model and self.evaluator_model):
            raise ConfigError("every role needs a model identifier")
        if self.evaluator_model in (self.writer_model, self.ideator_model):
            raise ConfigError(
                "evaluator model must differ from the writer and ideator models "
                f"(got evaluator={self.evaluator_model!r})"
            )

    def model_for(self, role: Origin) -> str:
        if role is Origin.IDEATOR:
            return self.ideator_model
        if role is Origin.WRITER:
            return self.writer_model
        if role is Origin.EVALUATOR:
            return self.evaluator_model
        raise ValueError(f"no model bound to role {role}")


def assign_models(config: Mapping[str, str] | None = None) -> RoleAssignment:
    """Build a role assignment from a config mapping with ``ideator``,
    ``writer`` and ``evaluator`` keys; missing keys take the defaults."""
    merged = dict(DEFAULT_MODELS)
    merged.update(config or {})
    return RoleAssignment(
        ideator_model=merged["ideator"],
        writer_model=merged["writer"],
        evaluator_model=merged["evaluator"],
    )


@dataclass(frozen=True)
class Completion:
    role: Origin
    prompt_fingerprint: str
    text: str
    latency_ms: int
    attempt: int


def _normalize(value: str) -> str:
    return _WS_RE.sub(" ", value).strip()


def prompt_fingerprint(role: Origin, template_id: str, variables: Mapping[str, str] | None) -> str:
    """Stable hash of (role, template id, normalized variable bindings).

    Whitespace changes inside bindings do not change the fingerprint, so
    recorded transcripts survive cosmetic prompt edits.
    """
    normalized = None if variables is None else {k: _normalize(v) for k, v in sorted(variables.items())}
    blob = json.dumps({"role": role.value, "template": template_id, "vars": normalized}, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def coarse_fingerprint(role: Origin, template_id: str) -> str:
    """Fingerprint keyed only on role and template, used by hand-written
    replay fixtures that do not want to pin exact variable bindings."""
    return prompt_fingerprint(role, template_id, None)


def _fingerprints_for(role: Origin, prompt: str | RenderedPrompt) -> tuple[str, str]:
    if isinstance(prompt, RenderedPrompt):
        exact = prompt_fingerprint(role, prompt.template_id, dict(prompt.variables))
        return exact, coarse_fingerprint(role, prompt.template_id)
    return prompt_fingerprint(role, "raw", {"prompt": prompt}), coarse_fingerprint(role, "raw")


class Provider(Protocol):
    def complete(self, model: str, prompt: str, params: SamplingParams) -> str: ...


class HTTPChatProvider:
    """Minimal client for an OpenAI-compatible chat-completions endpoint.

    Model identifiers are passed through opaquely; base URL and API key come
    from configuration (see :mod:`ideasmith.service`).
    """

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        http: httpx.Client | None = None,
        timeout: float = 60.0,
    ):
        self._base = base_url.rstrip("/")
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._http = http or httpx.Client(timeout=timeout, headers=headers)

    def complete(self, model: str, prompt: str, params: SamplingParams) -> str:
        payload = {
            "model": model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        }
        try:
            response = self._http.post(f"{self._base}/chat/completions", json=payload)
            response.raise_for_status()
            body = response.json()
            return body["choices"][0]["message"]["content"]
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise ProviderError(f"chat completion failed for {model}: {exc}") from exc


class TokenBucket:
    """Per-model rate limiter: ``per_minute`` tokens, burst up to capacity."""

    def __init__(
        self,
        per_minute: int,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if per_minute < 1:
            raise ValueError("per_minute must be >= 1")
        self.capacity = float(per_minute)
        self.tokens = float(per_minute)
        self.per_second = per_minute / 60.0
        self._updated = clock()
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                self.tokens = min(self.capacity, self.tokens + (now - self._updated) * self.per_second)
                self._updated = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.per_second
            self._sleep(wait)


@dataclass(frozen=True)
class TranscriptEntry:
    fingerprint: str
    text: str


class Transcript:
    """Ordered canned responses for replay, keyed by prompt fingerprint.

    Lookup is by fingerprint then order: each fingerprint has a FIFO queue,
    and exhausting it is an error. Entries keyed with a coarse fingerprint
    (role + template only) act as fallbacks for hand-written fixtures.
    Consumption is serialized: one consumer at a time.
    """

    def __init__(self, entries: Iterable[TranscriptEntry] = ()):
        self._queues: dict[str, deque[str]] = {}
        self._entries: list[TranscriptEntry] = []
        self._lock = threading.Lock()
        for entry in entries:
            self.add(entry.fingerprint, entry.text)

    def add(self, fingerprint: str, text: str) -> None:
        with self._lock:
            self._entries.append(TranscriptEntry(fingerprint, text))
            self._queues.setdefault(fingerprint, deque()).append(text)

    def add_for_template(self, role: Origin, template_id: str, text: str) -> None:
        self.add(coarse_fingerprint(role, template_id), text)

    def next_for(self, exact: str, coarse: str | None) -> str:
        with self._lock:
            for key in (exact, coarse):
                if key is None:
                    continue
                queue = self._queues.get(key)
                if queue:
                    return queue.popleft()
        raise ReplayExhausted(f"no canned response left for fingerprint {exact}")

    def remaining(self) -> int:
        with self._lock:
            return sum(len(q) for q in self._queues.values())

    def entries(self) -> list[TranscriptEntry]:
        return list(self._entries)

    def save(self, path: Path | str) -> None:
        lines = [json.dumps({"fingerprint": e.fingerprint, "text": e.text}) for e in self._entries]
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")

    @classmethod
    def load(cls, path: Path | str) -> "Transcript":
        transcript = cls()
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            record = json.loads(line)
            transcript.add(record["fingerprint"], record["text"])
        return transcript


_JSON_REASK = (
    "Your previous reply was not valid JSON matching the required structure. "
    "Only return valid JSON. Do not include any other text in your response."
)

_TRAILING_COMMA_RE = re.compile(r",\s*([}\]])")


def extract_json(text: str) -> Any | None:
    """Pull the first balanced top-level JSON object out of model text.

    Tolerates code fences, leading prose, and trailing commas. Returns None
    when no parseable object is found.
    """
    start = text.find("{")
    while start != -1:
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    candidate = text[start : i + 1]
                    try:
                        return json.loads(candidate)
                    except json.JSONDecodeError:
                        try:
                            return json.loads(_TRAILING_COMMA_RE.sub(r"\1", candidate))
                        except json.JSONDecodeError:
                            break
        start = text.find("{", start + 1)
    return None


@dataclass
class LLMGateway:
    """Entry point for every model call in the system.

    Live mode sends prompts to ``provider`` (optionally recording them to
    ``recorder``); replay mode answers from ``transcript`` and is
    bit-deterministic. Every call emits a step to the agent-step log hook.
    """

    assignment: RoleAssignment
    provider: Provider | None = None
    transcript: Transcript | None = None
    recorder: Transcript | None = None
    max_transport_retries: int = 2
    max_json_retries: int = 2
    params: dict[Origin, SamplingParams] = field(default_factory=lambda: dict(DEFAULT_PARAMS))
    clock: Callable[[], float] = time.monotonic
    rate_limit_per_minute: int | None = None

    def __post_init__(self) -> None:
        if self.provider is None and self.transcript is None:
            raise ConfigError("gateway needs a provider or a replay transcript")
        self._buckets: dict[str, TokenBucket] = {}
        self._buckets_lock = threading.Lock()

    def _throttle(self, model: str) -> None:
        if self.rate_limit_per_minute is None:
            return
        with self._buckets_lock:
            bucket = self._buckets.get(model)
            if bucket is None:
                bucket = TokenBucket(self.rate_limit_per_minute, clock=self.clock)
                self._buckets[model] = bucket
        bucket.acquire()

    def complete(
        self,
        role: Origin,
        prompt: str | RenderedPrompt,
        params: SamplingParams | None = None,
    ) -> Completion:
        if role not in AGENT_ROLES:
            raise ValueError(f"role {role} cannot issue model calls")
        text_prompt = prompt.text if isinstance(prompt, RenderedPrompt) else prompt
        if not text_prompt.strip():
            raise ValueError("prompt must be non-empty")
        template_id = prompt.template_id if isinstance(prompt, RenderedPrompt) else "raw"
        exact, coarse = _fingerprints_for(role, prompt)
        sampling = params or self.params.get(role, SamplingParams())
        started = self.clock()

        if self.transcript is not None:
            try:
                text = self.transcript.next_for(exact, coarse)
            except ReplayExhausted:
                emit_step(role, f"llm:{template_id}", ok=False, detail="replay transcript exhausted")
                raise
            latency = int((self.clock() - started) * 1000)
            emit_step(role, f"llm:{template_id}", ok=True, detail=f"replayed {exact}")
            return Completion(role, exact, text, latency, attempt=1)

        model = self.assignment.model_for(role)
        last_error: ProviderError | None = None
        for attempt in range(1, self.max_transport_retries + 2):
            try:
                self._throttle(model)
                text = self.provider.complete(model, text_prompt, sampling)  # type: ignore[union-attr]
            except ProviderError as exc:
                last_error = exc
                emit_step(
                    role,
                    f"llm:{template_id}",
                    ok=False,
                    detail=f"attempt {attempt} failed: {exc}",
                )
                continue
            latency = int((self.clock() - started) * 1000)
            if self.recorder is not None:
                self.recorder.add(exact, text)
            emit_step(role, f"llm:{template_id}", ok=True, detail=f"model={model} attempt={attempt}")
            return Completion(role, exact, text, latency, attempt=attempt)
        raise ProviderError(
            f"{model} failed after {self.max_transport_retries + 1} attempts: {last_error}",
            role=role,
            attempts=self.max_transport_retries + 1,
        )

    def complete_json(
        self,
        role: Origin,
        prompt: str | RenderedPrompt,
        schema_check: Callable[[Any], bool],
        max_retries: int | None = None,
    ) -> Any:
        """Call the model and parse its reply as a JSON object.

        On a parse or schema failure the prompt is re-asked with a corrective
        instruction, up to ``max_retries`` extra times. The returned value
        always passes ``schema_check``.
        """
        retries = self.max_json_retries if max_retries is None else max_retries
        attempts: list[str] = []
        current: str | RenderedPrompt = prompt
        for attempt in range(retries + 1):
            completion = self.complete(role, current)
            attempts.append(completion.text)
            value = extract_json(completion.text)
            if value is not None and schema_check(value):
                return value
            current = self._corrective(prompt, attempt + 1)
        raise StructuredOutputError(
            f"no valid structured output after {retries + 1} attempts", attempts
        )

    @staticmethod
    def _corrective(original: str | RenderedPrompt, retry: int) -> RenderedPrompt:
        if isinstance(original, RenderedPrompt):
            return RenderedPrompt(
                template_id=f"{original.template_id}#retry{retry}",
                text=f"{original.text}\n\n{_JSON_REASK}",
                variables=dict(original.variables),
            )
        return RenderedPrompt(
            template_id=f"raw#retry{retry}",
            text=f"{original}\n\n{_JSON_REASK}",
            variables={"prompt": original},
        )
