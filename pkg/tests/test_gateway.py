from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from ideasmith.gateway import (
    ConfigError,
    LLMGateway,
    ProviderError,
    ReplayExhausted,
    RoleAssignment,
    SamplingParams,
    StructuredOutputError,
    Transcript,
    assign_models,
    coarse_fingerprint,
    extract_json,
    prompt_fingerprint,
)
from ideasmith.model import Origin
from ideasmith.prompts import TemplateId, render


class ScriptedProvider:
    """Provider returning (or raising) scripted outputs in order."""

    def __init__(self, outputs):
        self.outputs = list(outputs)
        self.calls: list[tuple[str, str]] = []

    def complete(self, model: str, prompt: str, params: SamplingParams) -> str:
        self.calls.append((model, prompt))
        item = self.outputs.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


ASSIGNMENT = RoleAssignment("m1", "m1", "m2")


# -- role assignment ------------------------------------------------------------


def test_assignment_two_service_pattern_is_valid():
    assignment = assign_models({"ideator": "m1", "writer": "m1", "evaluator": "m2"})
    assert assignment.ideator_model == "m1"
    assert assignment.evaluator_model == "m2"


def test_assignment_rejects_shared_evaluator_model():
    with pytest.raises(ConfigError):
        assign_models({"ideator": "m1", "writer": "m1", "evaluator": "m1"})


def test_assignment_all_distinct_is_valid():
    assignment = assign_models({"ideator": "m1", "writer": "m2", "evaluator": "m3"})
    assert assignment.model_for(Origin.WRITER) == "m2"


_models = st.sampled_from(["m1", "m2", "m3", "m4"])


@given(_models, _models, _models)
def test_assignment_property_rejects_exactly_evaluator_collisions(ideator, writer, evaluator):
    collides = evaluator in (ideator, writer)
    if collides:
        with pytest.raises(ConfigError):
            RoleAssignment(ideator, writer, evaluator)
    else:
        assignment = RoleAssignment(ideator, writer, evaluator)
        assert assignment.evaluator_model == evaluator


def test_defaults_use_two_services():
    assignment = assign_models()
    assert assignment.evaluator_model != assignment.writer_model


# -- fingerprints and replay -----------------------------------------------------


def test_fingerprint_survives_whitespace_jitter_in_bindings():
    a = prompt_fingerprint(Origin.WRITER, "literature", {"question": "an  idea\nhere"})
    b = prompt_fingerprint(Origin.WRITER, "literature", {"question": "an idea here"})
    assert a == b
    assert a != prompt_fingerprint(Origin.WRITER, "literature", {"question": "different"})
    assert a != prompt_fingerprint(Origin.IDEATOR, "literature", {"question": "an idea here"})


def test_replay_passthrough_and_determinism():
    def run() -> list[str]:
        transcript = Transcript()
        transcript.add(prompt_fingerprint(Origin.WRITER, "raw", {"prompt": "hello"}), "world")
        transcript.add_for_template(Origin.WRITER, "raw", "again")
        gateway = LLMGateway(assignment=ASSIGNMENT, transcript=transcript)
        first = gateway.complete(Origin.WRITER, "hello")
        second = gateway.complete(Origin.WRITER, "hello")
        return [first.text, second.text, str(first.attempt)]

    assert run() == run() == ["world", "again", "1"]


def test_replay_exhaustion_is_an_error():
    gateway = LLMGateway(assignment=ASSIGNMENT, transcript=Transcript())
    with pytest.raises(ReplayExhausted):
        gateway.complete(Origin.WRITER, "hello")


def test_replay_consumes_per_fingerprint_in_order():
    transcript = Transcript()
    transcript.add_for_template(Origin.WRITER, "raw", "one")
    transcript.add_for_template(Origin.WRITER, "raw", "two")
    gateway = LLMGateway(assignment=ASSIGNMENT, transcript=transcript)
    assert gateway.complete(Origin.WRITER, "x").text == "one"
    assert gateway.complete(Origin.WRITER, "y").text == "two"
    with pytest.raises(ReplayExhausted):
        gateway.complete(Origin.WRITER, "z")


def test_transcript_round_trips_through_file(tmp_path):
    transcript = Transcript()
    transcript.add("fp1", "first")
    transcript.add("fp1", "second")
    path = tmp_path / "transcript.jsonl"
    transcript.save(path)
    loaded = Transcript.load(path)
    assert [e.fingerprint for e in loaded.entries()] == ["fp1", "fp1"]
    assert loaded.next_for("fp1", None) == "first"
    assert loaded.next_for("fp1", None) == "second"


def test_record_mode_captures_live_responses():
    provider = ScriptedProvider(["answer"])
    recorder = Transcript()
    gateway = LLMGateway(assignment=ASSIGNMENT, provider=provider, recorder=recorder)
    completion = gateway.complete(Origin.WRITER, "question")
    assert completion.text == "answer"
    entries = recorder.entries()
    assert len(entries) == 1
    assert entries[0].fingerprint == completion.prompt_fingerprint


# -- transport retry ---------------------------------------------------------------


def test_retry_arithmetic_two_failures_then_success():
    provider = ScriptedProvider(
        [ProviderError("boom"), ProviderError("boom again"), "recovered"]
    )
    gateway = LLMGateway(assignment=ASSIGNMENT, provider=provider, max_transport_retries=2)
    completion = gateway.complete(Origin.WRITER, "q")
    assert completion.text == "recovered"
    assert completion.attempt == 3


def test_retries_exhausted_raises_provider_error_with_attempts():
    provider = ScriptedProvider([ProviderError("a"), ProviderError("b"), ProviderError("c")])
    gateway = LLMGateway(assignment=ASSIGNMENT, provider=provider, max_transport_retries=2)
    with pytest.raises(ProviderError) as excinfo:
        gateway.complete(Origin.WRITER, "q")
    assert excinfo.value.attempts == 3
    assert excinfo.value.role is Origin.WRITER


def test_gateway_requires_some_backend():
    with pytest.raises(ConfigError):
        LLMGateway(assignment=ASSIGNMENT)


def test_empty_prompt_rejected():
    gateway = LLMGateway(assignment=ASSIGNMENT, transcript=Transcript())
    with pytest.raises(ValueError):
        gateway.complete(Origin.WRITER, "   ")


def test_non_agent_role_rejected():
    gateway = LLMGateway(assignment=ASSIGNMENT, transcript=Transcript())
    with pytest.raises(ValueError):
        gateway.complete(Origin.HUMAN, "hi")


# -- structured output ---------------------------------------------------------------


def _is_eval_payload(value) -> bool:
    return (
        isinstance(value, dict)
        and isinstance(value.get("evaluations"), list)
        and all(isinstance(e, dict) and "criteriaId" in e for e in value["evaluations"])
    )


def test_complete_json_happy_path():
    payload = '{"evaluations":[{"criteriaId":1,"reflections":["ok"]}]}'
    transcript = Transcript()
    transcript.add_for_template(Origin.EVALUATOR, "critiques", payload)
    gateway = LLMGateway(assignment=ASSIGNMENT, transcript=transcript)
    prompt = render(
        TemplateId.CRITIQUES,
        research_idea="i",
        literature_synthesis="l",
        research_goals="g",
        study_plan="p",
        criteria_text="c",
        context="ctx",
    )
    value = gateway.complete_json(Origin.EVALUATOR, prompt, _is_eval_payload)
    assert value["evaluations"][0]["criteriaId"] == 1


def test_complete_json_retries_with_corrective_instruction():
    transcript = Transcript()
    transcript.add_for_template(Origin.EVALUATOR, "critiques", "I think the proposal is fine.")
    transcript.add_for_template(
        Origin.EVALUATOR, "critiques#retry1", '{"evaluations":[{"criteriaId":2}]}'
    )
    gateway = LLMGateway(assignment=ASSIGNMENT, transcript=transcript)
    prompt = render(
        TemplateId.CRITIQUES,
        research_idea="i",
        literature_synthesis="l",
        research_goals="g",
        study_plan="p",
        criteria_text="c",
        context="ctx",
    )
    value = gateway.complete_json(Origin.EVALUATOR, prompt, _is_eval_payload)
    assert value["evaluations"][0]["criteriaId"] == 2


def test_complete_json_exhaustion_carries_all_attempts():
    transcript = Transcript()
    for template in ("critiques", "critiques#retry1", "critiques#retry2"):
        transcript.add_for_template(Origin.EVALUATOR, template, "still not json")
    gateway = LLMGateway(assignment=ASSIGNMENT, transcript=transcript, max_json_retries=2)
    prompt = render(
        TemplateId.CRITIQUES,
        research_idea="i",
        literature_synthesis="l",
        research_goals="g",
        study_plan="p",
        criteria_text="c",
        context="ctx",
    )
    with pytest.raises(StructuredOutputError) as excinfo:
        gateway.complete_json(Origin.EVALUATOR, prompt, _is_eval_payload)
    assert len(excinfo.value.attempts) == 3


def test_complete_json_never_returns_schema_failures():
    transcript = Transcript()
    transcript.add_for_template(Origin.EVALUATOR, "raw", '{"wrong": true}')
    transcript.add_for_template(Origin.EVALUATOR, "raw#retry1", '{"evaluations": []}')
    gateway = LLMGateway(assignment=ASSIGNMENT, transcript=transcript)
    value = gateway.complete_json(Origin.EVALUATOR, "judge this", _is_eval_payload)
    assert _is_eval_payload(value)


# -- JSON extraction -----------------------------------------------------------------


@pytest.mark.parametrize(
    "text,expected",
    [
        ('{"a": 1}', {"a": 1}),
        ('prose first\n{"a": [1, 2]} trailing', {"a": [1, 2]}),
        ('```json\n{"a": {"b": "x}y"}}\n```', {"a": {"b": "x}y"}}),
        ('{"a": 1,}', {"a": 1}),
        ('{"a": [1, 2,],}', {"a": [1, 2]}),
        ("no json at all", None),
        ('{"broken": ', None),
    ],
)
def test_extract_json(text, expected):
    assert extract_json(text) == expected


def test_coarse_fingerprint_distinct_per_role_and_template():
    assert coarse_fingerprint(Origin.WRITER, "literature") != coarse_fingerprint(
        Origin.IDEATOR, "literature"
    )
    assert coarse_fingerprint(Origin.WRITER, "literature") != coarse_fingerprint(
        Origin.WRITER, "goals"
    )


# -- rate limiting ----------------------------------------------------------------


def test_token_bucket_throttles_beyond_burst():
    timeline = {"now": 0.0}
    sleeps: list[float] = []

    def clock() -> float:
        return timeline["now"]

    def sleep(seconds: float) -> None:
        sleeps.append(seconds)
        timeline["now"] += seconds

    from ideasmith.gateway import TokenBucket

    bucket = TokenBucket(per_minute=60, clock=clock, sleep=sleep)  # 1 token/second
    for _ in range(60):  # burst drains the full capacity without waiting
        bucket.acquire()
    assert sleeps == []
    bucket.acquire()
    assert len(sleeps) == 1
    assert sleeps[0] == pytest.approx(1.0)


def test_gateway_rate_limit_is_per_model():
    calls: list[str] = []

    class CountingProvider:
        def complete(self, model, prompt, params):
            calls.append(model)
            return "ok"

    timeline = {"now": 0.0}
    gateway = LLMGateway(
        assignment=ASSIGNMENT,
        provider=CountingProvider(),
        rate_limit_per_minute=120,
        clock=lambda: timeline["now"],
    )
    for _ in range(3):
        gateway.complete(Origin.WRITER, "hello")
        gateway.complete(Origin.EVALUATOR, "hello")
    assert calls.count("m1") == 3 and calls.count("m2") == 3
    assert set(gateway._buckets) == {"m1", "m2"}
