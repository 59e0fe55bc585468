from __future__ import annotations

import random

import pytest

from ideasmith.model import Origin, SectionKind
from ideasmith.provenance import (
    StepLog,
    StepStatus,
    UnknownVersion,
    VersionStore,
    bind_step_sink,
    emit_step,
)

from conftest import TickingClock

KIND = SectionKind.STUDY_PLAN


def test_first_commit_gets_seq_one_without_parent():
    store = VersionStore()
    record = store.commit("p1", KIND, "content", ("A1",), Origin.WRITER)
    assert record.seq == 1 and record.parent_seq is None
    assert store.current("p1", KIND) == record


def test_commits_chain_sequences_and_parents():
    store = VersionStore()
    for i in range(1, 4):
        record = store.commit("p1", KIND, f"v{i}", (), Origin.WRITER)
    assert record.seq == 3 and record.parent_seq == 2


def test_identical_recommit_still_appends():
    store = VersionStore()
    store.commit("p1", KIND, "same", (), Origin.WRITER)
    again = store.commit("p1", KIND, "same", (), Origin.HUMAN)
    assert again.seq == 2 and again.parent_seq == 1
    assert len(store.history("p1", KIND)) == 2


def test_revert_restores_bit_identical_content_as_new_human_version():
    store = VersionStore()
    store.commit("p1", KIND, "v1 content", ("A1",), Origin.WRITER)
    store.commit("p1", KIND, "v2 content", (), Origin.WRITER)
    store.commit("p1", KIND, "v3 content", (), Origin.HUMAN)
    reverted = store.revert("p1", KIND, 1)
    assert reverted.seq == 4
    assert reverted.content == "v1 content"
    assert reverted.citations == ("A1",)
    assert reverted.origin is Origin.HUMAN
    assert len(store.history("p1", KIND)) == 4


def test_revert_to_current_is_a_content_noop_but_new_version():
    store = VersionStore()
    store.commit("p1", KIND, "only", (), Origin.WRITER)
    reverted = store.revert("p1", KIND, 1)
    assert reverted.seq == 2 and reverted.content == "only"


def test_revert_unknown_version():
    store = VersionStore()
    store.commit("p1", KIND, "x", (), Origin.WRITER)
    with pytest.raises(UnknownVersion):
        store.revert("p1", KIND, 7)


def test_histories_are_isolated_per_proposal_and_kind():
    store = VersionStore()
    store.commit("p1", KIND, "a", (), Origin.WRITER)
    store.commit("p2", KIND, "b", (), Origin.WRITER)
    store.commit("p1", SectionKind.RESEARCH_GOALS, "c", (), Origin.WRITER)
    assert [v.content for v in store.history("p1", KIND)] == ["a"]
    assert [v.content for v in store.history("p2", KIND)] == ["b"]
    assert store.history("p1", SectionKind.LITERATURE_SYNTHESIS) == []


def test_history_lists_ascending_with_origins():
    store = VersionStore()
    store.commit("p1", KIND, "a", (), Origin.WRITER)
    store.commit("p1", KIND, "b", (), Origin.HUMAN)
    history = store.history("p1", KIND)
    assert [v.seq for v in history] == [1, 2]
    assert [v.origin for v in history] == [Origin.WRITER, Origin.HUMAN]
    # the returned list is a copy; mutating it does not touch the store
    history.pop()
    assert len(store.history("p1", KIND)) == 2


def test_model_based_commit_revert_sequences():
    """Model-based oracle: a plain list of contents replayed alongside the
    store. After every operation the store's current content equals the
    model's expected value, and history only ever grows."""
    rng = random.Random(1234)
    store = VersionStore()
    model: list[str] = []  # content per seq, index i -> seq i+1
    history_len = 0
    for step in range(1000):
        if model and rng.random() < 0.4:
            target = rng.randrange(len(model)) + 1
            record = store.revert("p1", KIND, target)
            model.append(model[target - 1])
        else:
            content = f"content-{step}-{rng.randrange(1000)}"
            record = store.commit("p1", KIND, content, (), Origin.WRITER)
            model.append(content)
        assert record.seq == len(model)
        assert store.current("p1", KIND).content == model[-1]
        assert len(store.history("p1", KIND)) == len(model)
        assert len(model) > history_len  # append-only: never shrinks
        history_len = len(model)
    # spot-check the full history is still byte-identical to the model
    for i, version in enumerate(store.history("p1", KIND)):
        assert version.content == model[i]


def test_restore_requires_append_order():
    store = VersionStore()
    clock = TickingClock()
    store.restore(
        "p1", KIND, seq=1, content="a", citations=(), origin=Origin.WRITER,
        parent_seq=None, created_at=clock(),
    )
    with pytest.raises(ValueError):
        store.restore(
            "p1", KIND, seq=3, content="b", citations=(), origin=Origin.WRITER,
            parent_seq=1, created_at=clock(),
        )


# -- step log ---------------------------------------------------------------------


def test_step_log_appends_with_failures_and_details():
    log = StepLog()
    log.log("s1", Origin.WRITER, "draft:study-plan", StepStatus.SUCCESS)
    failed = log.log("s1", Origin.WRITER, "draft:research-goals", StepStatus.FAILURE, "boom")
    assert failed.detail == "boom"
    steps = log.for_session("s1")
    assert [s.seq for s in steps] == [1, 2]
    assert steps[1].status is StepStatus.FAILURE


def test_step_log_keys_by_session():
    log = StepLog()
    log.log("s1", Origin.WRITER, "a", StepStatus.SUCCESS)
    log.log("s2", Origin.WRITER, "b", StepStatus.SUCCESS)
    log.log("s1", Origin.WRITER, "c", StepStatus.SUCCESS)
    assert [s.operation for s in log.for_session("s1")] == ["a", "c"]
    assert [s.operation for s in log.for_session("s2")] == ["b"]


def test_emit_step_routes_to_bound_sink_and_drops_otherwise():
    captured = []
    emit_step(Origin.WRITER, "nowhere", ok=True)  # no sink bound: dropped
    with bind_step_sink(lambda role, op, ok, detail: captured.append((role, op, ok, detail))):
        emit_step(Origin.WRITER, "llm:literature", ok=True, detail="d")
        emit_step(Origin.SYSTEM, "search:web", ok=False, detail="down")
    emit_step(Origin.WRITER, "after", ok=True)  # unbound again
    assert captured == [
        (Origin.WRITER, "llm:literature", True, "d"),
        (Origin.SYSTEM, "search:web", False, "down"),
    ]
