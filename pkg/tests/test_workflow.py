from __future__ import annotations

import json

import pytest
from hypothesis import given, settings, strategies as st

from ideasmith.model import (
    ControlLevel,
    Origin,
    ProposalStatus,
    SectionKind,
    UserAction,
    Vote,
)
from ideasmith.provenance import StepStatus
from ideasmith.workflow import (
    GATING_MATRIX,
    Busy,
    GatingDenied,
    NoVersion,
    ShortTermMemory,
    gate,
    require_gate,
)

from conftest import (
    IDEA_LINES,
    Stack,
    script_evaluation,
    script_full_pass,
    script_ideation,
    script_revision_round,
    script_suggestions,
    section_text,
)

# Transcription of the per-level availability table, used as the test-side
# oracle: (action, low, medium, intensive).
TABLE = [
    (UserAction.GENERATE_SEED_IDEAS, True, True, True),
    (UserAction.CUSTOMIZE_SEED_IDEA, True, True, True),
    (UserAction.SEARCH_SELECT_LITERATURE, False, True, True),
    (UserAction.PROMPT_SECTION, False, True, True),
    (UserAction.HIGHLIGHT_FOR_EDIT, False, False, True),
    (UserAction.DIRECT_EDIT, False, False, True),
    (UserAction.CUSTOMIZE_CRITERIA, False, True, True),
    (UserAction.FEEDBACK_ON_CRITIQUES, False, False, True),
    (UserAction.REQUEST_MORE_CRITIQUES, False, False, True),
    (UserAction.SELECT_IMPROVEMENTS, True, True, True),
    (UserAction.CUSTOMIZE_IMPROVEMENTS, False, False, True),
    (UserAction.PROMPT_FULL_PROPOSAL, True, True, True),
    (UserAction.REVERT_VERSION, True, True, True),
]


def test_gating_matrix_matches_the_table_row_for_row():
    assert len(TABLE) == 13
    for action, low, medium, intensive in TABLE:
        assert gate(action, ControlLevel.LOW) is low, action
        assert gate(action, ControlLevel.MEDIUM) is medium, action
        assert gate(action, ControlLevel.INTENSIVE) is intensive, action


def test_gating_matrix_is_total():
    assert set(GATING_MATRIX) == {(a, l) for a in UserAction for l in ControlLevel}
    assert len(GATING_MATRIX) == 39


def test_require_gate_returns_witness_or_denies_with_reason():
    witness = require_gate(UserAction.CUSTOMIZE_SEED_IDEA, ControlLevel.LOW)
    assert witness.action is UserAction.CUSTOMIZE_SEED_IDEA
    with pytest.raises(GatingDenied) as excinfo:
        require_gate(UserAction.HIGHLIGHT_FOR_EDIT, ControlLevel.MEDIUM)
    assert excinfo.value.reason == "highlight_for_edit_denied_at_medium"


# -- helpers -----------------------------------------------------------------------


def start(stack: Stack, level: ControlLevel):
    return stack.workflow.start_session("sentiment, toxicity, security", level)


def witness(action: UserAction, session):
    return require_gate(action, session.level)


def seed_and_select(stack: Stack, session, num_ideas: int = 4):
    script_ideation(stack, num_ideas)
    ideas = stack.workflow.generate_seed_ideas(
        session, witness(UserAction.GENERATE_SEED_IDEAS, session), num_ideas
    )
    stack.workflow.select_idea(session, ideas[0].id, witness(UserAction.CUSTOMIZE_SEED_IDEA, session))
    return ideas


def full_pass(stack: Stack, session):
    cited = script_full_pass(stack)
    proposal = stack.workflow.generate_full_proposal(
        session, witness(UserAction.PROMPT_FULL_PROPOSAL, session)
    )
    return proposal, cited


# -- sessions ----------------------------------------------------------------------


def test_start_session_defaults(stack):
    session = start(stack, ControlLevel.LOW)
    assert [c.name for c in session.criteria] == ["Novelty", "Feasibility", "Impact"]
    assert session.level is ControlLevel.LOW
    assert session.ideas == []
    with pytest.raises(ValueError):
        stack.workflow.start_session("   ", ControlLevel.LOW)


def test_two_sessions_are_isolated(stack):
    a = start(stack, ControlLevel.LOW)
    b = start(stack, ControlLevel.LOW)
    assert a.id != b.id
    a.criteria.pop()
    assert len(b.criteria) == 3


def test_generate_seed_ideas_and_selection(stack):
    session = start(stack, ControlLevel.INTENSIVE)
    ideas = seed_and_select(stack, session)
    assert [i.text for i in ideas] == IDEA_LINES
    assert session.active_idea_id == ideas[0].id
    assert session.original_idea_text == ideas[0].text


def test_customize_idea_invalidates_enhanced_query(stack):
    session = start(stack, ControlLevel.INTENSIVE)
    ideas = seed_and_select(stack, session)
    idea = ideas[0]
    stack.transcript.add_for_template(Origin.WRITER, "hypothetical_abstract", "abs one")
    stack.pipeline.hypothetical_abstract(idea)
    assert idea.abstract == "abs one"
    stack.workflow.customize_idea(
        session, idea.id, "A customized idea line, with detail.", witness(UserAction.CUSTOMIZE_SEED_IDEA, session)
    )
    assert idea.text == "A customized idea line, with detail"
    assert idea.abstract is None
    assert stack.pipeline.enhanced_query_for(idea.id) is None


# -- full proposal pass --------------------------------------------------------------


def test_generate_full_proposal_commits_three_sections_in_cot_order(stack):
    session = start(stack, ControlLevel.INTENSIVE)
    seed_and_select(stack, session)
    proposal, cited = full_pass(stack, session)
    assert set(proposal.sections) == set(SectionKind)
    history_times = []
    for kind in SectionKind:
        record = stack.versions.current(proposal.id, kind)
        assert record.seq == 1
        assert set(record.citations) == set(cited[kind])
        history_times.append(record.created_at)
    # chain-of-thought order shows up as nondecreasing commit times
    assert history_times == sorted(history_times)
    assert session.memory.refs(SectionKind.STUDY_PLAN) == (1, None)


def test_generate_requires_selected_idea(stack):
    session = start(stack, ControlLevel.INTENSIVE)
    with pytest.raises(Exception):
        stack.workflow.generate_full_proposal(
            session, witness(UserAction.PROMPT_FULL_PROPOSAL, session)
        )


def test_partial_commit_on_mid_pass_failure(stack):
    session = start(stack, ControlLevel.INTENSIVE)
    seed_and_select(stack, session)
    # only literature is scripted: the goals stage exhausts the transcript
    stack.transcript.add_for_template(Origin.WRITER, "hypothetical_abstract", "abs")
    ids = stack.top_papers("abs", SectionKind.LITERATURE_SYNTHESIS, n=2)
    stack.transcript.add_for_template(
        Origin.WRITER, "literature", section_text(SectionKind.LITERATURE_SYNTHESIS, ids)
    )
    with pytest.raises(Exception):
        stack.workflow.generate_full_proposal(
            session, witness(UserAction.PROMPT_FULL_PROPOSAL, session)
        )
    proposal = session.active_proposal
    assert stack.versions.current(proposal.id, SectionKind.LITERATURE_SYNTHESIS) is not None
    assert stack.versions.current(proposal.id, SectionKind.RESEARCH_GOALS) is None
    failures = [
        s for s in stack.steps.for_session(session.id) if s.status is StepStatus.FAILURE
    ]
    assert any("draft:research-goals" in s.operation for s in failures)


def test_second_pass_keeps_memory_bounded_to_two_refs(stack):
    session = start(stack, ControlLevel.INTENSIVE)
    seed_and_select(stack, session)
    full_pass(stack, session)
    script_full_pass(stack, tag=" second")
    stack.workflow.generate_full_proposal(
        session, witness(UserAction.PROMPT_FULL_PROPOSAL, session)
    )
    for kind in SectionKind:
        assert session.memory.refs(kind) == (2, 1)


def test_busy_rejected_while_generation_in_flight(stack):
    session = start(stack, ControlLevel.INTENSIVE)
    seed_and_select(stack, session)
    lock = stack.workflow._lock_for(session.id)
    assert lock.acquire(blocking=False)
    try:
        with pytest.raises(Busy):
            stack.workflow.generate_full_proposal(
                session, witness(UserAction.PROMPT_FULL_PROPOSAL, session)
            )
    finally:
        lock.release()


# -- section revision -----------------------------------------------------------------


def test_prompt_section_uses_short_term_context_and_commits(stack):
    session = start(stack, ControlLevel.MEDIUM)
    seed_and_select(stack, session)
    proposal, _ = full_pass(stack, session)
    ids = stack.top_papers(
        "sentiment toxicity security", SectionKind.LITERATURE_SYNTHESIS, n=1
    )
    stack.transcript.add_for_template(
        Origin.WRITER, "revising", f"Expanded literature [CITATION: {ids[0]}]."
    )
    revised = stack.workflow.prompt_section(
        session,
        SectionKind.LITERATURE_SYNTHESIS,
        "add more technical details",
        witness(UserAction.PROMPT_SECTION, session),
    )
    assert revised.seq == 2
    assert session.memory.refs(SectionKind.LITERATURE_SYNTHESIS) == (2, 1)
    assert stack.versions.current(proposal.id, SectionKind.LITERATURE_SYNTHESIS).content.startswith(
        "Expanded literature"
    )


def test_inline_edit_reports_overreach_flag(stack):
    session = start(stack, ControlLevel.INTENSIVE)
    seed_and_select(stack, session)
    full_pass(stack, session)
    stack.transcript.add_for_template(Origin.WRITER, "revising", "Totally rewritten text.")
    current = stack.workflow.short_term_context(session, SectionKind.STUDY_PLAN).current_text
    revised = stack.workflow.inline_edit(
        session,
        SectionKind.STUDY_PLAN,
        (0, min(10, len(current))),
        "tighten this",
        witness(UserAction.HIGHLIGHT_FOR_EDIT, session),
    )
    assert revised.span_overreach is True


def test_direct_edit_commits_human_version(stack):
    session = start(stack, ControlLevel.INTENSIVE)
    seed_and_select(stack, session)
    proposal, _ = full_pass(stack, session)
    revised = stack.workflow.direct_edit(
        session,
        SectionKind.STUDY_PLAN,
        "my own plan text",
        witness(UserAction.DIRECT_EDIT, session),
    )
    record = stack.versions.current(proposal.id, SectionKind.STUDY_PLAN)
    assert record.origin is Origin.HUMAN
    assert record.content == "my own plan text"
    assert revised.seq == 2


# -- evaluation flow -------------------------------------------------------------------


def evaluated_session(stack: Stack, level=ControlLevel.INTENSIVE):
    session = start(stack, level)
    seed_and_select(stack, session)
    full_pass(stack, session)
    script_evaluation(stack)
    report = stack.workflow.evaluate(session)
    return session, report


def test_evaluate_binds_fingerprint_and_marks_status(stack):
    session, report = evaluated_session(stack)
    assert session.active_proposal.status is ProposalStatus.EVALUATED
    assert stack.workflow.report_is_current(session, report)
    stack.workflow.direct_edit(
        session, SectionKind.STUDY_PLAN, "edited", witness(UserAction.DIRECT_EDIT, session)
    )
    assert not stack.workflow.report_is_current(session, report)


def test_record_feedback_last_write_wins(stack):
    session, report = evaluated_session(stack)
    w = witness(UserAction.FEEDBACK_ON_CRITIQUES, session)
    stack.workflow.record_feedback(session, 1, 0, Vote.UP, w)
    assert report.reflections[1][0].vote is Vote.UP
    stack.workflow.record_feedback(session, 1, 0, Vote.DOWN, w)
    assert report.reflections[1][0].vote is Vote.DOWN


def test_feedback_denied_below_intensive(stack):
    session, _ = evaluated_session(stack, level=ControlLevel.INTENSIVE)
    with pytest.raises(GatingDenied):
        require_gate(UserAction.FEEDBACK_ON_CRITIQUES, ControlLevel.MEDIUM)
    with pytest.raises(GatingDenied):
        require_gate(UserAction.FEEDBACK_ON_CRITIQUES, ControlLevel.LOW)


def test_more_critiques_appends_to_report(stack):
    session, report = evaluated_session(stack)
    stack.transcript.add_for_template(
        Origin.EVALUATOR,
        "additional_critiques",
        json.dumps({"reflections": ["impact reflection one", "impact reflection two"]}),
    )
    fresh = stack.workflow.more_critiques(
        session, 3, witness(UserAction.REQUEST_MORE_CRITIQUES, session)
    )
    assert len(fresh) == 2
    assert len(report.reflections[3]) == 3


def test_apply_improvements_full_round(stack):
    session, report = evaluated_session(stack)
    script_suggestions(stack)
    improvements = stack.workflow.suggest_improvements(session)
    assert len(improvements) == 3
    script_revision_round(stack, "A refined dashboard idea with interventions")
    proposal = stack.workflow.apply_improvements(
        session,
        [i.criterion_id for i in improvements],
        witness(UserAction.SELECT_IMPROVEMENTS, session),
    )
    assert session.active_idea().text == "A refined dashboard idea with interventions"
    for kind in SectionKind:
        assert stack.versions.current(proposal.id, kind).seq == 2
    assert not stack.workflow.report_is_current(session, report)


def test_apply_improvements_customization_needs_its_own_gate(stack):
    session, _ = evaluated_session(stack)
    script_suggestions(stack)
    improvements = stack.workflow.suggest_improvements(session)
    with pytest.raises(GatingDenied):
        stack.workflow.apply_improvements(
            session,
            [improvements[0].criterion_id],
            witness(UserAction.SELECT_IMPROVEMENTS, session),
            customized={improvements[0].criterion_id: "my spin"},
            customize_witness=None,
        )


def test_apply_improvements_rejects_empty_choice(stack):
    session, _ = evaluated_session(stack)
    script_suggestions(stack)
    stack.workflow.suggest_improvements(session)
    with pytest.raises(ValueError):
        stack.workflow.apply_improvements(
            session, [], witness(UserAction.SELECT_IMPROVEMENTS, session)
        )


def test_low_level_improvements_are_accept_all(stack):
    session = start(stack, ControlLevel.LOW)
    seed_and_select(stack, session)
    full_pass(stack, session)
    script_evaluation(stack)
    stack.workflow.evaluate(session)
    script_suggestions(stack)
    improvements = stack.workflow.suggest_improvements(session)
    with pytest.raises(GatingDenied) as excinfo:
        stack.workflow.apply_improvements(
            session,
            [improvements[0].criterion_id],  # partial selection
            witness(UserAction.SELECT_IMPROVEMENTS, session),
        )
    assert excinfo.value.reason == "select_improvements_accept_only_at_low"


# -- auto iteration ---------------------------------------------------------------------


def low_session_with_proposal(stack: Stack):
    session = start(stack, ControlLevel.LOW)
    seed_and_select(stack, session)
    full_pass(stack, session)
    return session


def test_auto_iterate_scripted_accept_after_round_two(stack):
    session = low_session_with_proposal(stack)
    # round 1: evaluate + suggest + apply; round 2: evaluate + suggest + accept
    script_evaluation(stack)
    script_suggestions(stack)
    script_revision_round(stack, "Round one refined idea line")
    script_evaluation(stack)
    script_suggestions(stack)

    decisions = iter([False, True])
    stack.workflow.auto_iterate(session, max_rounds=5, accept=lambda *_: next(decisions))
    assert len(session.reports) == 2
    assert stack.transcript.remaining() == 0


def test_auto_iterate_respects_round_bound(stack):
    session = low_session_with_proposal(stack)
    script_evaluation(stack)
    script_suggestions(stack)
    script_revision_round(stack, "Round one refined idea line")
    stack.workflow.auto_iterate(session, max_rounds=1, accept=lambda *_: False)
    assert len(session.reports) == 1


def test_auto_iterate_only_at_low(stack):
    session = start(stack, ControlLevel.INTENSIVE)
    with pytest.raises(ValueError):
        stack.workflow.auto_iterate(session, max_rounds=1)


def test_auto_iterate_trace_contains_only_the_allowed_human_events(stack):
    session = low_session_with_proposal(stack)
    script_evaluation(stack)
    script_suggestions(stack)
    script_revision_round(stack, "Refined idea line for purity check")
    script_evaluation(stack)
    script_suggestions(stack)
    decisions = iter([False, True])
    stack.workflow.auto_iterate(session, max_rounds=5, accept=lambda *_: next(decisions))
    human_ops = {
        s.operation
        for s in stack.steps.for_session(session.id)
        if s.role is Origin.HUMAN
    }
    assert human_ops <= {"start_session", "select_idea", "customize_idea", "accept_decision"}


# -- provenance-facing ops -----------------------------------------------------------


def test_revert_commits_new_version_and_updates_memory(stack):
    session = start(stack, ControlLevel.LOW)
    seed_and_select(stack, session)
    proposal, _ = full_pass(stack, session)
    original = stack.versions.current(proposal.id, SectionKind.STUDY_PLAN).content
    # create a second version through revert itself (content no-op)
    revised = stack.workflow.revert(
        session, SectionKind.STUDY_PLAN, 1, witness(UserAction.REVERT_VERSION, session)
    )
    assert revised.seq == 2 and revised.text == original
    assert session.memory.refs(SectionKind.STUDY_PLAN) == (2, 1)


def test_short_term_context_returns_exactly_current_and_previous(stack):
    session = start(stack, ControlLevel.INTENSIVE)
    seed_and_select(stack, session)
    proposal, _ = full_pass(stack, session)
    w = witness(UserAction.DIRECT_EDIT, session)
    for i in range(2, 6):
        stack.workflow.direct_edit(session, SectionKind.STUDY_PLAN, f"plan v{i}", w)
    context = stack.workflow.short_term_context(session, SectionKind.STUDY_PLAN)
    assert context.current_seq == 5 and context.previous_seq == 4
    assert context.current_text == "plan v5"
    assert context.previous_text == "plan v4"
    fresh = start(stack, ControlLevel.INTENSIVE)
    with pytest.raises(Exception):
        stack.workflow.short_term_context(fresh, SectionKind.STUDY_PLAN)
    # a proposal whose goals section was never drafted raises NoVersion
    session.memory._slots.pop(SectionKind.RESEARCH_GOALS)
    with pytest.raises(NoVersion):
        stack.workflow.short_term_context(session, SectionKind.RESEARCH_GOALS)


def test_memory_never_holds_more_than_two_refs():
    memory = ShortTermMemory()

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.integers(1, 200), min_size=1, max_size=40))
    def check(seqs):
        mem = ShortTermMemory()
        expected_prev = None
        expected_current = None
        for seq in seqs:
            mem.update(SectionKind.STUDY_PLAN, seq)
            expected_prev = expected_current
            expected_current = seq
        refs = mem.refs(SectionKind.STUDY_PLAN)
        assert refs == (expected_current, expected_prev)

    check()
    assert memory.refs(SectionKind.STUDY_PLAN) is None


# -- saving and forking -----------------------------------------------------------------


def test_save_then_regenerate_forks_new_proposal_id(stack):
    session = start(stack, ControlLevel.INTENSIVE)
    seed_and_select(stack, session)
    proposal, _ = full_pass(stack, session)
    stack.workflow.save_proposal(session)
    assert proposal.status is ProposalStatus.SAVED
    with pytest.raises(ValueError):
        stack.workflow.save_proposal(session)

    script_full_pass(stack, tag=" after fork")
    forked = stack.workflow.generate_full_proposal(
        session, witness(UserAction.PROMPT_FULL_PROPOSAL, session)
    )
    assert forked.id != proposal.id
    assert forked.status is ProposalStatus.DRAFT
    # the saved proposal's history is untouched by the fork's new versions
    assert stack.versions.current(proposal.id, SectionKind.STUDY_PLAN).seq == 1
    assert stack.versions.current(forked.id, SectionKind.STUDY_PLAN).seq == 2


def test_save_requires_all_sections(stack):
    session = start(stack, ControlLevel.INTENSIVE)
    seed_and_select(stack, session)
    with pytest.raises(Exception):
        stack.workflow.save_proposal(session)
