"""Session state machine over the agents: control-level gating, short-term
memory (current plus immediately preceding version per section), the full
generation pass, improvement application, and the low-control autonomous
iteration loop.

Sessions are single-writer aggregates: generation-grade mutations take a
non-blocking per-session lock and a concurrent second request is rejected
with Busy rather than interleaved.
"""

from __future__ import annotations

import threading
import uuid
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Iterator, Mapping, Sequence

from .agents import ContextBundle, Evaluator, Ideator, Writer
from .citations import draft_from_text
from .gateway import LLMGateway
from .model import (
    ControlLevel,
    Criterion,
    EvaluationReport,
    Improvement,
    Origin,
    Proposal,
    ProposalStatus,
    Reflection,
    SectionDraft,
    SectionKind,
    SeedIdea,
    UserAction,
    Vote,
    default_criteria,
    proposal_fingerprint,
    utcnow,
)
from .provenance import StepLog, StepStatus, VersionStore, bind_step_sink
from .retrieval import PaperRecord, RetrievalPipeline, Snippet

__all__ = [
    "Busy",
    "GATING_MATRIX",
    "GateWitness",
    "GatingDenied",
    "NoVersion",
    "Session",
    "ShortTermMemory",
    "UnknownEntity",
    "Workflow",
    "gate",
    "require_gate",
]


class GatingDenied(PermissionError):
    def __init__(self, action: UserAction, level: ControlLevel, reason: str | None = None):
        self.action = action
        self.level = level
        self.reason = reason or f"{action.value}_denied_at_{level.value}"
        super().__init__(self.reason)


class Busy(RuntimeError):
    """A generation is already in flight for this session."""


class NoVersion(LookupError):
    pass


class UnknownEntity(KeyError):
    pass


# Transcription of the per-level feature availability table. Low permits only
# seed-idea work, full-proposal prompting, accepting suggested improvements,
# and reverting; Medium adds literature search/selection, section prompting,
# and criteria customization; Intensive permits everything.
_LOW_ALLOWED = frozenset(
    {
        UserAction.GENERATE_SEED_IDEAS,
        UserAction.CUSTOMIZE_SEED_IDEA,
        UserAction.PROMPT_FULL_PROPOSAL,
        UserAction.SELECT_IMPROVEMENTS,
        UserAction.REVERT_VERSION,
    }
)
_MEDIUM_ALLOWED = _LOW_ALLOWED | {
    UserAction.SEARCH_SELECT_LITERATURE,
    UserAction.PROMPT_SECTION,
    UserAction.CUSTOMIZE_CRITERIA,
}
_INTENSIVE_ALLOWED = frozenset(UserAction)

_ALLOWED = {
    ControlLevel.LOW: _LOW_ALLOWED,
    ControlLevel.MEDIUM: _MEDIUM_ALLOWED,
    ControlLevel.INTENSIVE: _INTENSIVE_ALLOWED,
}

GATING_MATRIX: dict[tuple[UserAction, ControlLevel], bool] = {
    (action, level): action in _ALLOWED[level]
    for action in UserAction
    for level in ControlLevel
}


def gate(action: UserAction, level: ControlLevel) -> bool:
    """Pure table lookup; total over UserAction x ControlLevel."""
    return GATING_MATRIX[(action, level)]


@dataclass(frozen=True)
class GateWitness:
    """Proof that a gating check passed; mutating operations require one."""

    action: UserAction
    level: ControlLevel


def require_gate(action: UserAction, level: ControlLevel) -> GateWitness:
    if not gate(action, level):
        raise GatingDenied(action, level)
    return GateWitness(action=action, level=level)


@dataclass
class SectionMemory:
    current_seq: int
    previous_seq: int | None
    bundle: ContextBundle | None


class ShortTermMemory:
    """Per-section store of the current version, the immediately preceding
    one, and the retrieval context used to produce it — never anything older."""

    def __init__(self) -> None:
        self._slots: dict[SectionKind, SectionMemory] = {}

    def update(self, kind: SectionKind, seq: int, bundle: ContextBundle | None = None) -> None:
        slot = self._slots.get(kind)
        if slot is None:
            self._slots[kind] = SectionMemory(current_seq=seq, previous_seq=None, bundle=bundle)
            return
        slot.previous_seq = slot.current_seq
        slot.current_seq = seq
        if bundle is not None:
            slot.bundle = bundle

    def slot(self, kind: SectionKind) -> SectionMemory | None:
        return self._slots.get(kind)

    def reset(self) -> None:
        self._slots.clear()

    def refs(self, kind: SectionKind) -> tuple[int, int | None] | None:
        slot = self._slots.get(kind)
        return (slot.current_seq, slot.previous_seq) if slot else None


@dataclass
class Session:
    """One researcher's ideation session. The control level is immutable
    after creation; criteria start from the three defaults."""

    id: str
    level: ControlLevel
    keywords: str
    created_at: datetime
    criteria: list[Criterion] = field(default_factory=default_criteria)
    ideas: list[SeedIdea] = field(default_factory=list)
    active_idea_id: str | None = None
    original_idea_text: str | None = None
    proposals: list[Proposal] = field(default_factory=list)
    pinned_papers: list[str] = field(default_factory=list)
    search_results: list[PaperRecord] = field(default_factory=list)
    snippets: list[Snippet] = field(default_factory=list)
    reports: list[EvaluationReport] = field(default_factory=list)
    memory: ShortTermMemory = field(default_factory=ShortTermMemory)
    closed_at: datetime | None = None

    @property
    def active_proposal(self) -> Proposal | None:
        return self.proposals[-1] if self.proposals else None

    @property
    def last_report(self) -> EvaluationReport | None:
        return self.reports[-1] if self.reports else None

    def idea(self, idea_id: str) -> SeedIdea:
        for idea in self.ideas:
            if idea.id == idea_id:
                return idea
        raise UnknownEntity(f"no idea {idea_id} in session {self.id}")

    def active_idea(self) -> SeedIdea:
        if self.active_idea_id is None:
            raise UnknownEntity("no idea selected")
        return self.idea(self.active_idea_id)

    def criterion(self, criterion_id: int) -> Criterion:
        for criterion in self.criteria:
            if criterion.id == criterion_id:
                return criterion
        raise UnknownEntity(f"no criterion {criterion_id} in session {self.id}")


@dataclass(frozen=True)
class ShortTermContext:
    """Rendering inputs for a section: exactly the current and the
    immediately preceding version texts plus the stored retrieval bundle."""

    current_text: str
    current_seq: int
    previous_text: str | None
    previous_seq: int | None
    bundle: ContextBundle


class Workflow:
    """The engine mutating sessions through the agent roles."""

    def __init__(
        self,
        gateway: LLMGateway,
        pipeline: RetrievalPipeline,
        versions: VersionStore,
        steps: StepLog,
        *,
        num_ideas_default: int = 4,
        max_rounds_default: int = 3,
        clock: Callable[[], datetime] = utcnow,
        id_factory: Callable[[], str] | None = None,
    ):
        self.gateway = gateway
        self.pipeline = pipeline
        self.versions = versions
        self.steps = steps
        self.num_ideas_default = num_ideas_default
        self.max_rounds_default = max_rounds_default
        self._clock = clock
        self._new_id = id_factory or (lambda: uuid.uuid4().hex[:12])
        self.ideator = Ideator(gateway, id_factory=self._new_id)
        self.writer = Writer(gateway)
        self.evaluator = Evaluator(gateway)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    # -- plumbing -----------------------------------------------------------

    def now(self) -> datetime:
        return self._clock()

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())

    @contextmanager
    def _generation(self, session: Session) -> Iterator[None]:
        lock = self._lock_for(session.id)
        if not lock.acquire(blocking=False):
            raise Busy(f"a generation is already in flight for session {session.id}")
        try:
            yield
        finally:
            lock.release()

    def _sink(self, session: Session):
        def sink(role: Origin, operation: str, ok: bool, detail: str) -> None:
            self.steps.log(
                session.id,
                role,
                operation,
                StepStatus.SUCCESS if ok else StepStatus.FAILURE,
                detail,
            )

        return sink

    @contextmanager
    def _step(self, session: Session, role: Origin, operation: str, detail: str = "") -> Iterator[None]:
        """Log one step per agent operation, failures included, while binding
        the fine-grained sink so gateway/pipeline calls trace too."""
        started = self._clock()
        with bind_step_sink(self._sink(session)):
            try:
                yield
            except Exception as exc:
                self.steps.log(
                    session.id,
                    role,
                    operation,
                    StepStatus.FAILURE,
                    detail=f"{detail + ': ' if detail else ''}{exc}",
                    started_at=started,
                    ended_at=self._clock(),
                )
                raise
        self.steps.log(
            session.id,
            role,
            operation,
            StepStatus.SUCCESS,
            detail=detail,
            started_at=started,
            ended_at=self._clock(),
        )

    # -- session lifecycle ----------------------------------------------------

    def start_session(self, keywords: str, level: ControlLevel) -> Session:
        if not keywords.strip():
            raise ValueError("keywords must be non-empty")
        session = Session(
            id=self._new_id(),
            level=level,
            keywords=keywords,
            created_at=self._clock(),
        )
        self.steps.log(
            session.id, Origin.HUMAN, "start_session", StepStatus.SUCCESS, detail=keywords
        )
        return session

    def close_session(self, session: Session) -> None:
        session.closed_at = self._clock()

    # -- phase one: seed ideas ------------------------------------------------

    def generate_seed_ideas(
        self,
        session: Session,
        witness: GateWitness,
        num_ideas: int | None = None,
    ) -> list[SeedIdea]:
        """Rewrite the keywords, refresh the corpus, and brainstorm ideas."""
        self._check(witness, UserAction.GENERATE_SEED_IDEAS, session)
        count = num_ideas or self.num_ideas_default
        with self._generation(session):
            with self._step(session, Origin.IDEATOR, "generate_seed_ideas"):
                query = self.pipeline.rewrite_query(session.keywords)
                papers: list[PaperRecord] = []
                if self.pipeline.search_clients:
                    papers = self.pipeline.search_academic(query)
                    self.pipeline.ingest(papers)
                session.snippets = self.pipeline.web_snippets(query)
                chunks = ()
                if len(self.pipeline.index):
                    chunks = tuple(self.pipeline.retrieve_for(query, target=None))
                ctx = ContextBundle(chunks=chunks, snippets=tuple(session.snippets))
                ideas = self.ideator.ideate(session.keywords, count, ctx)
            session.ideas.extend(ideas)
            return ideas

    def select_idea(self, session: Session, idea_id: str, witness: GateWitness) -> SeedIdea:
        self._check(witness, UserAction.CUSTOMIZE_SEED_IDEA, session)
        idea = session.idea(idea_id)
        session.active_idea_id = idea.id
        if session.original_idea_text is None:
            session.original_idea_text = idea.text
        self.steps.log(
            session.id, Origin.HUMAN, "select_idea", StepStatus.SUCCESS, detail=idea.text
        )
        return idea

    def customize_idea(
        self, session: Session, idea_id: str, text: str, witness: GateWitness
    ) -> SeedIdea:
        """Edit the idea line before expansion. The enhanced query is
        invalidated so the next retrieval regenerates it."""
        self._check(witness, UserAction.CUSTOMIZE_SEED_IDEA, session)
        idea = session.idea(idea_id)
        cleaned = " ".join(text.split()).rstrip(".!?;:,")
        if not cleaned:
            raise ValueError("idea text must be non-empty")
        idea.text = cleaned
        idea.abstract = None
        idea.enhanced_query_ref = None
        self.pipeline.invalidate_enhanced(idea.id)
        session.active_idea_id = idea.id
        if session.original_idea_text is None:
            session.original_idea_text = cleaned
        self.steps.log(
            session.id, Origin.HUMAN, "customize_idea", StepStatus.SUCCESS, detail=cleaned
        )
        return idea

    # -- literature ------------------------------------------------------------

    def search_literature(
        self, session: Session, query: str, witness: GateWitness, limit: int | None = None
    ) -> list[PaperRecord]:
        self._check(witness, UserAction.SEARCH_SELECT_LITERATURE, session)
        with self._step(session, Origin.SYSTEM, "search_literature", detail=query):
            results = self.pipeline.search_academic(query, limit)
            self.pipeline.ingest(results)
        session.search_results = results
        return results

    def pin_papers(
        self, session: Session, citation_ids: Sequence[str], witness: GateWitness
    ) -> list[str]:
        self._check(witness, UserAction.SEARCH_SELECT_LITERATURE, session)
        known = {p.citation_id for p in session.search_results} | self.pipeline.index.paper_ids()
        for cid in citation_ids:
            if cid not in known:
                raise UnknownEntity(f"paper {cid} is not in this session's search results")
            if cid not in session.pinned_papers:
                session.pinned_papers.append(cid)
        return list(session.pinned_papers)

    # -- drafting ----------------------------------------------------------------

    def generate_full_proposal(self, session: Session, witness: GateWitness) -> Proposal:
        """The full pass: enhanced query, per-section retrieval, three
        chain-of-thought drafts with citation verification, all committed to
        provenance. A failing stage aborts the pass; committed sections stay."""
        self._check(witness, UserAction.PROMPT_FULL_PROPOSAL, session)
        idea = session.active_idea()
        with self._generation(session):
            proposal = self._ensure_editable_proposal(session, idea)
            with self._step(session, Origin.WRITER, "hypothetical_abstract"):
                enhanced = self.pipeline.hypothetical_abstract(idea)
            upstream: dict[SectionKind, SectionDraft] = {}
            for kind in SectionKind:
                with self._step(session, Origin.WRITER, f"draft:{kind.slug}"):
                    chunks = tuple(
                        self.pipeline.retrieve_for(enhanced, kind, pinned=session.pinned_papers)
                    )
                    ctx = ContextBundle(chunks=chunks, snippets=tuple(session.snippets))
                    draft = self.writer.draft_section(kind, idea, upstream, ctx)
                    record = self.versions.commit(
                        proposal.id, kind, draft.text, draft.citations, draft.origin
                    )
                    proposal.sections[kind] = record.seq
                    session.memory.update(kind, record.seq, ctx)
                upstream[kind] = draft
            return proposal

    def _ensure_editable_proposal(self, session: Session, idea: SeedIdea) -> Proposal:
        proposal = session.active_proposal
        if proposal is None:
            proposal = Proposal(id=self._new_id(), idea=idea)
            session.proposals.append(proposal)
            return proposal
        if proposal.status is ProposalStatus.SAVED:
            # Saved drafts are immutable deliverables; editing forks a new id
            # seeded with the saved content.
            fork = Proposal(id=self._new_id(), idea=idea)
            for kind, _ in sorted(proposal.sections.items()):
                current = self.versions.current(proposal.id, kind)
                if current is not None:
                    record = self.versions.commit(
                        fork.id, kind, current.content, current.citations, Origin.SYSTEM
                    )
                    fork.sections[kind] = record.seq
                    session.memory.update(kind, record.seq)
            session.proposals.append(fork)
            self.steps.log(
                session.id,
                Origin.SYSTEM,
                "fork_proposal",
                StepStatus.SUCCESS,
                detail=f"{proposal.id} -> {fork.id}",
            )
            return fork
        proposal.idea = idea
        return proposal

    def prompt_section(
        self, session: Session, kind: SectionKind, instruction: str, witness: GateWitness
    ) -> RevisedSection:
        """Prompt-driven revision of one section, reusing the short-term
        memory's retrieval context."""
        self._check(witness, UserAction.PROMPT_SECTION, session)
        if not instruction.strip():
            raise ValueError("instruction must be non-empty")
        return self._revise(session, kind, instruction=instruction, span=None)

    def inline_edit(
        self,
        session: Session,
        kind: SectionKind,
        span: tuple[int, int],
        instruction: str,
        witness: GateWitness,
    ) -> RevisedSection:
        """Span-scoped revision (highlight-for-edit). Intensive only."""
        self._check(witness, UserAction.HIGHLIGHT_FOR_EDIT, session)
        if not instruction.strip():
            raise ValueError("instruction must be non-empty")
        return self._revise(session, kind, instruction=instruction, span=span)

    def _revise(
        self,
        session: Session,
        kind: SectionKind,
        *,
        instruction: str,
        span: tuple[int, int] | None,
        suggestions: str = "",
    ) -> RevisedSection:
        proposal = self._require_proposal(session)
        context = self.short_term_context(session, kind)
        prev = draft_from_text(kind, context.current_text, Origin.WRITER)
        with self._generation(session):
            operation = "inline_edit" if span is not None else "prompt_section"
            with self._step(session, Origin.WRITER, f"{operation}:{kind.slug}"):
                outcome = self.writer.revise_section(
                    prev, suggestions, instruction, span, context.bundle
                )
            record = self.versions.commit(
                proposal.id, kind, outcome.draft.text, outcome.draft.citations, Origin.WRITER
            )
            proposal.sections[kind] = record.seq
            session.memory.update(kind, record.seq)
            return RevisedSection(
                kind=kind,
                seq=record.seq,
                text=record.content,
                span_overreach=outcome.span_overreach,
            )

    def direct_edit(
        self, session: Session, kind: SectionKind, text: str, witness: GateWitness
    ) -> RevisedSection:
        """Save a human edit verbatim as a new version."""
        self._check(witness, UserAction.DIRECT_EDIT, session)
        proposal = self._require_proposal(session)
        if self.versions.current(proposal.id, kind) is None:
            raise NoVersion(f"{kind.label} has no version to edit")
        draft = draft_from_text(kind, text, Origin.HUMAN)
        record = self.versions.commit(proposal.id, kind, draft.text, draft.citations, Origin.HUMAN)
        proposal.sections[kind] = record.seq
        session.memory.update(kind, record.seq)
        self.steps.log(
            session.id, Origin.HUMAN, f"direct_edit:{kind.slug}", StepStatus.SUCCESS
        )
        return RevisedSection(kind=kind, seq=record.seq, text=record.content, span_overreach=False)

    # -- evaluation ---------------------------------------------------------------

    def add_criterion(
        self,
        session: Session,
        witness: GateWitness,
        name: str | None = None,
        description: str | None = None,
    ) -> Criterion:
        """Add a user-defined criterion, or an agent-generated one when no
        name is given."""
        self._check(witness, UserAction.CUSTOMIZE_CRITERIA, session)
        if name is not None:
            if not (name.strip() and description and description.strip()):
                raise ValueError("a custom criterion needs a name and a description")
            if name.strip().lower() in {c.name.lower() for c in session.criteria}:
                raise ValueError(f"criterion {name!r} already exists")
            criterion = Criterion(
                id=max((c.id for c in session.criteria), default=0) + 1,
                name=name.strip(),
                description=description.strip(),
            )
        else:
            idea = session.active_idea()
            with self._step(session, Origin.EVALUATOR, "generate_criterion"):
                criterion = self.evaluator.generate_criterion(idea, session.criteria)
        session.criteria.append(criterion)
        return criterion

    def remove_criterion(self, session: Session, criterion_id: int, witness: GateWitness) -> None:
        self._check(witness, UserAction.CUSTOMIZE_CRITERIA, session)
        criterion = session.criterion(criterion_id)
        session.criteria.remove(criterion)

    def evaluate(self, session: Session) -> EvaluationReport:
        """Run the evaluator over the current proposal content. Reports are
        immutable snapshots keyed by the proposal fingerprint; section edits
        make them stale rather than mutating them."""
        proposal = self._require_proposal(session)
        sections = self._section_texts(proposal)
        idea = session.active_idea()
        enhanced = self.pipeline.enhanced_query_for(idea.id)
        chunks: tuple = ()
        if enhanced is not None and len(self.pipeline.index):
            chunks = tuple(self.pipeline.retrieve_for(enhanced, None))
        ctx = ContextBundle(chunks=chunks, snippets=())
        with self._step(session, Origin.EVALUATOR, "evaluate"):
            report = self.evaluator.evaluate(
                idea.text,
                sections,
                session.criteria,
                ctx,
                fingerprint=proposal_fingerprint(sections),
            )
        session.reports.append(report)
        if proposal.status is ProposalStatus.DRAFT:
            proposal.advance_status(ProposalStatus.EVALUATED)
        return report

    def report_is_current(self, session: Session, report: EvaluationReport) -> bool:
        proposal = session.active_proposal
        if proposal is None:
            return False
        return report.proposal_version_fingerprint == proposal_fingerprint(
            self._section_texts(proposal)
        )

    def record_feedback(
        self,
        session: Session,
        criterion_id: int,
        reflection_index: int,
        vote: Vote,
        witness: GateWitness,
    ) -> Reflection:
        """Thumbs up/down on one reflection; last write wins. The vote feeds
        the ordering of the suggestions prompt."""
        self._check(witness, UserAction.FEEDBACK_ON_CRITIQUES, session)
        report = self._require_report(session)
        reflections = report.reflections.get(criterion_id)
        if not reflections or not (0 <= reflection_index < len(reflections)):
            raise UnknownEntity(
                f"no reflection {reflection_index} for criterion {criterion_id}"
            )
        reflections[reflection_index].vote = vote
        self.steps.log(
            session.id,
            Origin.HUMAN,
            "provide_feedback",
            StepStatus.SUCCESS,
            detail=f"criterion={criterion_id} index={reflection_index} vote={vote.value}",
        )
        return reflections[reflection_index]

    def more_critiques(
        self, session: Session, criterion_id: int, witness: GateWitness
    ) -> list[Reflection]:
        self._check(witness, UserAction.REQUEST_MORE_CRITIQUES, session)
        report = self._require_report(session)
        criterion = session.criterion(criterion_id)
        proposal = self._require_proposal(session)
        idea = session.active_idea()
        existing = report.reflections.get(criterion_id, [])
        with self._step(session, Origin.EVALUATOR, "more_critiques"):
            fresh = self.evaluator.more_critiques(
                idea.text,
                self._section_texts(proposal),
                criterion,
                existing,
                self._evaluation_context(session),
            )
        report.reflections.setdefault(criterion_id, []).extend(fresh)
        return fresh

    def suggest_improvements(self, session: Session) -> list[Improvement]:
        """Fill the latest report with improvement suggestions (at most one
        group per criterion)."""
        report = self._require_report(session)
        proposal = self._require_proposal(session)
        idea = session.active_idea()
        with self._step(session, Origin.EVALUATOR, "suggest_improvements"):
            improvements = self.evaluator.suggest_improvements(
                idea.text,
                self._section_texts(proposal),
                report.criteria,
                report.reflections,
            )
        report.improvements = improvements
        report.validate_improvements()
        return improvements

    def apply_improvements(
        self,
        session: Session,
        chosen_ids: Sequence[int],
        witness: GateWitness,
        customized: Mapping[int, str] | None = None,
        customize_witness: GateWitness | None = None,
    ) -> Proposal:
        """Refine the idea from the chosen improvements, re-retrieve for the
        refined idea, and revise every section. The idea step is atomic;
        section revisions follow the partial-commit contract."""
        self._check(witness, UserAction.SELECT_IMPROVEMENTS, session)
        customized = dict(customized or {})
        if customized:
            if customize_witness is None:
                raise GatingDenied(UserAction.CUSTOMIZE_IMPROVEMENTS, session.level)
            self._check(customize_witness, UserAction.CUSTOMIZE_IMPROVEMENTS, session)
        report = self._require_report(session)
        if not report.improvements:
            raise UnknownEntity("no improvement suggestions to apply")
        if not chosen_ids:
            raise ValueError("chosen improvements must be non-empty")
        by_id = {imp.criterion_id: imp for imp in report.improvements}
        unknown = [cid for cid in chosen_ids if cid not in by_id]
        if unknown:
            raise UnknownEntity(f"no improvement group for criteria {unknown}")
        if session.level is ControlLevel.LOW and set(chosen_ids) != set(by_id):
            # Low control accepts the agent-suggested revision wholesale.
            raise GatingDenied(
                UserAction.SELECT_IMPROVEMENTS,
                session.level,
                reason="select_improvements_accept_only_at_low",
            )

        chosen: list[Improvement] = []
        for cid in chosen_ids:
            improvement = by_id[cid]
            improvement.selected = True
            if cid in customized:
                improvement.customized_text = customized[cid]
            chosen.append(improvement)

        feedback = "\n".join(
            f"{imp.criterion_name}: {imp.customized_text or '; '.join(imp.suggestions)}"
            for imp in chosen
        )
        idea = session.active_idea()
        proposal = self._ensure_editable_proposal(session, idea)

        with self._generation(session):
            with self._step(session, Origin.IDEATOR, "refine_idea"):
                original = session.original_idea_text or idea.text
                refined = self.ideator.refine_idea(original, idea, feedback)
            session.ideas.append(refined)
            session.active_idea_id = refined.id
            proposal.idea = refined
            with self._step(session, Origin.WRITER, "hypothetical_abstract"):
                enhanced = self.pipeline.hypothetical_abstract(refined)
            for kind in SectionKind:
                current = self.versions.current(proposal.id, kind)
                if current is None:
                    continue
                with self._step(session, Origin.WRITER, f"revise:{kind.slug}"):
                    chunks = tuple(
                        self.pipeline.retrieve_for(enhanced, kind, pinned=session.pinned_papers)
                    )
                    ctx = ContextBundle(chunks=chunks, snippets=tuple(session.snippets))
                    prev = draft_from_text(kind, current.content, Origin.WRITER)
                    outcome = self.writer.revise_section(prev, feedback, "", None, ctx)
                    record = self.versions.commit(
                        proposal.id, kind, outcome.draft.text, outcome.draft.citations, Origin.WRITER
                    )
                    proposal.sections[kind] = record.seq
                    session.memory.update(kind, record.seq, ctx)
        return proposal

    def auto_iterate(
        self,
        session: Session,
        max_rounds: int | None = None,
        accept: Callable[[Session, EvaluationReport, list[Improvement]], bool] | None = None,
    ) -> Proposal:
        """Low-control loop: evaluate, suggest, accept-or-apply, repeat.

        Stops when the accept callback signals satisfaction or the round
        budget is exhausted; every round's artifacts are persisted. A hard
        failure mid-round stops the loop with state intact.
        """
        if session.level is not ControlLevel.LOW:
            raise ValueError("autonomous iteration is a low-control feature")
        rounds = max_rounds or self.max_rounds_default
        if rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        proposal = self._require_proposal(session)
        for _ in range(rounds):
            report = self.evaluate(session)
            improvements = self.suggest_improvements(session)
            satisfied = bool(accept(session, report, improvements)) if accept else False
            self.steps.log(
                session.id,
                Origin.HUMAN,
                "accept_decision",
                StepStatus.SUCCESS,
                detail="accepted" if satisfied else "continue",
            )
            if satisfied or not improvements:
                break
            witness = require_gate(UserAction.SELECT_IMPROVEMENTS, session.level)
            proposal = self.apply_improvements(
                session, [imp.criterion_id for imp in improvements], witness
            )
        return proposal

    # -- provenance views ------------------------------------------------------

    def revert(
        self, session: Session, kind: SectionKind, target_seq: int, witness: GateWitness
    ) -> RevisedSection:
        self._check(witness, UserAction.REVERT_VERSION, session)
        proposal = self._require_proposal(session)
        record = self.versions.revert(proposal.id, kind, target_seq)
        proposal.sections[kind] = record.seq
        session.memory.update(kind, record.seq)
        self.steps.log(
            session.id,
            Origin.HUMAN,
            f"revert:{kind.slug}",
            StepStatus.SUCCESS,
            detail=f"to version {target_seq}",
        )
        return RevisedSection(kind=kind, seq=record.seq, text=record.content, span_overreach=False)

    def short_term_context(self, session: Session, kind: SectionKind) -> ShortTermContext:
        """Exactly the current and immediately preceding version texts plus
        the stored retrieval bundle — never older versions."""
        proposal = self._require_proposal(session)
        slot = session.memory.slot(kind)
        if slot is None:
            raise NoVersion(f"{kind.label} has no version yet")
        current = self.versions.get(proposal.id, kind, slot.current_seq)
        previous = (
            self.versions.get(proposal.id, kind, slot.previous_seq)
            if slot.previous_seq is not None
            else None
        )
        return ShortTermContext(
            current_text=current.content,
            current_seq=current.seq,
            previous_text=previous.content if previous else None,
            previous_seq=previous.seq if previous else None,
            bundle=slot.bundle or ContextBundle(),
        )

    def save_proposal(self, session: Session) -> Proposal:
        """Freeze the active proposal as an immutable deliverable."""
        proposal = self._require_proposal(session)
        if proposal.status is ProposalStatus.SAVED:
            raise ValueError("proposal is already saved")
        if len(proposal.sections) < len(SectionKind):
            raise ValueError("proposal needs all three sections before saving")
        if proposal.status is ProposalStatus.DRAFT:
            proposal.advance_status(ProposalStatus.EVALUATED)
        proposal.advance_status(ProposalStatus.SAVED)
        self.steps.log(
            session.id, Origin.HUMAN, "save_proposal", StepStatus.SUCCESS, detail=proposal.id
        )
        return proposal

    # -- helpers ----------------------------------------------------------------

    def _check(self, witness: GateWitness, action: UserAction, session: Session) -> None:
        if witness.action is not action or witness.level is not session.level:
            raise GatingDenied(action, session.level, reason="witness_mismatch")
        if not gate(action, session.level):
            raise GatingDenied(action, session.level)

    def _require_proposal(self, session: Session) -> Proposal:
        proposal = session.active_proposal
        if proposal is None:
            raise UnknownEntity(f"session {session.id} has no proposal")
        return proposal

    def _require_report(self, session: Session) -> EvaluationReport:
        report = session.last_report
        if report is None:
            raise UnknownEntity(f"session {session.id} has no evaluation report")
        return report

    def _section_texts(self, proposal: Proposal) -> dict[SectionKind, str]:
        texts: dict[SectionKind, str] = {}
        for kind, seq in proposal.sections.items():
            texts[kind] = self.versions.get(proposal.id, kind, seq).content
        return texts

    def _evaluation_context(self, session: Session) -> ContextBundle:
        idea = session.active_idea()
        enhanced = self.pipeline.enhanced_query_for(idea.id)
        if enhanced is None or not len(self.pipeline.index):
            return ContextBundle()
        return ContextBundle(chunks=tuple(self.pipeline.retrieve_for(enhanced, None)))


@dataclass(frozen=True)
class RevisedSection:
    kind: SectionKind
    seq: int
    text: str
    span_overreach: bool
