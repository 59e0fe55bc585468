"""Shared vocabulary of the ideation system.

Pure value types: seed ideas, proposal sections, evaluation criteria,
critiques and improvements, control levels, gateable user actions, and
citation identifiers. Everything here is plain data with no I/O, safe to
share between threads.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum, IntEnum
from typing import Mapping

__all__ = [
    "ControlLevel",
    "Criterion",
    "DEFAULT_CRITERIA",
    "EvaluationReport",
    "Improvement",
    "Origin",
    "Proposal",
    "ProposalStatus",
    "Reflection",
    "SectionDraft",
    "SectionKind",
    "SeedIdea",
    "UserAction",
    "Vote",
    "default_criteria",
    "is_citation_token",
    "proposal_fingerprint",
    "utcnow",
]

CITATION_TOKEN_RE = re.compile(r"[A-Za-z][A-Za-z0-9]*\Z")

_TERMINAL_PUNCTUATION = ".!?;:,"
_CITATION_MARKER_RE = re.compile(r"\[\s*citation\b|\[\d+\]", re.IGNORECASE)


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


def is_citation_token(token: str) -> bool:
    """True when ``token`` is a legal citation identifier (letter first, alphanumeric)."""
    return bool(CITATION_TOKEN_RE.match(token))


class Origin(str, Enum):
    """Who produced a piece of content or performed a step."""

    HUMAN = "human"
    IDEATOR = "ideator"
    WRITER = "writer"
    EVALUATOR = "evaluator"
    SYSTEM = "system"


class ControlLevel(str, Enum):
    """Degree of human supervision over the agents."""

    LOW = "low"
    MEDIUM = "medium"
    INTENSIVE = "intensive"


class SectionKind(IntEnum):
    """The three proposal sections, ordered by drafting (chain-of-thought) order."""

    LITERATURE_SYNTHESIS = 1
    RESEARCH_GOALS = 2
    STUDY_PLAN = 3

    @property
    def label(self) -> str:
        return _SECTION_LABELS[self]

    @property
    def slug(self) -> str:
        return _SECTION_SLUGS[self]

    def upstream(self) -> tuple["SectionKind", ...]:
        """Kinds that must be drafted before this one."""
        return tuple(k for k in SectionKind if k < self)

    @classmethod
    def from_slug(cls, slug: str) -> "SectionKind":
        for kind, s in _SECTION_SLUGS.items():
            if s == slug:
                return kind
        raise ValueError(f"unknown section: {slug!r}")


_SECTION_LABELS = {
    SectionKind.LITERATURE_SYNTHESIS: "Literature Synthesis",
    SectionKind.RESEARCH_GOALS: "Research Goals",
    SectionKind.STUDY_PLAN: "Study Plan",
}

_SECTION_SLUGS = {
    SectionKind.LITERATURE_SYNTHESIS: "literature-synthesis",
    SectionKind.RESEARCH_GOALS: "research-goals",
    SectionKind.STUDY_PLAN: "study-plan",
}


class UserAction(str, Enum):
    """The thirteen gateable features. The gating matrix in the workflow
    module is total over UserAction x ControlLevel."""

    GENERATE_SEED_IDEAS = "generate_seed_ideas"
    CUSTOMIZE_SEED_IDEA = "customize_seed_idea"
    SEARCH_SELECT_LITERATURE = "search_select_literature"
    PROMPT_SECTION = "prompt_section"
    HIGHLIGHT_FOR_EDIT = "highlight_for_edit"
    DIRECT_EDIT = "direct_edit"
    CUSTOMIZE_CRITERIA = "customize_criteria"
    FEEDBACK_ON_CRITIQUES = "feedback_on_critiques"
    REQUEST_MORE_CRITIQUES = "request_more_critiques"
    SELECT_IMPROVEMENTS = "select_improvements"
    CUSTOMIZE_IMPROVEMENTS = "customize_improvements"
    PROMPT_FULL_PROPOSAL = "prompt_full_proposal"
    REVERT_VERSION = "revert_version"


class Vote(str, Enum):
    UP = "up"
    DOWN = "down"


class ProposalStatus(str, Enum):
    DRAFT = "draft"
    EVALUATED = "evaluated"
    SAVED = "saved"


_STATUS_ORDER = {
    ProposalStatus.DRAFT: 0,
    ProposalStatus.EVALUATED: 1,
    ProposalStatus.SAVED: 2,
}


@dataclass
class SeedIdea:
    """A one-line candidate research direction.

    The text is a single sentence without terminal punctuation and without
    citation markers; the enhanced query (the hypothetical abstract used for
    dense retrieval) is attached once generated and reused afterwards.
    """

    id: str
    text: str
    source_keywords: list[str] = field(default_factory=list)
    abstract: str | None = None
    enhanced_query_ref: str | None = None

    def __post_init__(self) -> None:
        text = self.text
        if not text or not text.strip():
            raise ValueError("seed idea text must be non-empty")
        if "\n" in text or "\r" in text:
            raise ValueError("seed idea text must be a single line")
        if text.rstrip()[-1] in _TERMINAL_PUNCTUATION:
            raise ValueError("seed idea text must not end with punctuation")
        if _CITATION_MARKER_RE.search(text):
            raise ValueError("seed idea text must not contain citation markers")


@dataclass
class SectionDraft:
    """One drafted proposal section with the citations it carries.

    ``citations`` is an ordered set (no duplicates) of citation tokens; it is
    derived from the text, so every listed token appears in the text in wire
    format. Use :func:`ideasmith.citations.draft_from_text` to build drafts.
    """

    kind: SectionKind
    text: str
    citations: tuple[str, ...]
    origin: Origin
    created_at: datetime = field(default_factory=utcnow)

    def __post_init__(self) -> None:
        if len(set(self.citations)) != len(self.citations):
            raise ValueError("duplicate citation ids in draft")
        for token in self.citations:
            if not is_citation_token(token):
                raise ValueError(f"invalid citation token: {token!r}")


@dataclass
class Proposal:
    """A proposal under development: a seed idea plus the current version of
    each section (by sequence number in the version store)."""

    id: str
    idea: SeedIdea
    sections: dict[SectionKind, int] = field(default_factory=dict)
    status: ProposalStatus = ProposalStatus.DRAFT

    def advance_status(self, to: ProposalStatus) -> None:
        """Move the status forward. Transitions are monotone
        draft -> evaluated -> saved; moving backwards raises."""
        if _STATUS_ORDER[to] < _STATUS_ORDER[self.status]:
            raise ValueError(f"cannot move proposal from {self.status.value} back to {to.value}")
        if to is not ProposalStatus.DRAFT and len(self.sections) < len(SectionKind):
            raise ValueError("proposal needs all three sections before leaving draft status")
        self.status = to


@dataclass
class Criterion:
    """An evaluation criterion. Ids are small integers because the evaluator
    JSON contract refers to criteria by numeric id."""

    id: int
    name: str
    description: str
    is_default: bool = False


@dataclass
class Reflection:
    """One critical reflection for a criterion, votable under intensive control."""

    criterion_id: int
    text: str
    vote: Vote | None = None


@dataclass
class Improvement:
    """An actionable improvement suggestion for one criterion."""

    criterion_id: int
    criterion_name: str
    suggestions: list[str]
    selected: bool = False
    customized_text: str | None = None

    def __post_init__(self) -> None:
        if not self.suggestions:
            raise ValueError("improvement needs at least one suggestion")
        if self.customized_text is not None and not self.selected:
            raise ValueError("customized_text is only valid on a selected improvement")


@dataclass
class EvaluationReport:
    """One evaluation pass: per-criterion reflections plus the improvement
    suggestions derived from them, pinned to a proposal content fingerprint."""

    proposal_version_fingerprint: str
    criteria: list[Criterion]
    reflections: dict[int, list[Reflection]]
    improvements: list[Improvement] = field(default_factory=list)

    def __post_init__(self) -> None:
        known = {c.id for c in self.criteria}
        for cid in self.reflections:
            if cid not in known:
                raise ValueError(f"reflection references unknown criterion id {cid}")
        for imp in self.improvements:
            if imp.criterion_id not in known:
                raise ValueError(f"improvement references unknown criterion id {imp.criterion_id}")

    def validate_improvements(self) -> None:
        known = {c.id for c in self.criteria}
        for imp in self.improvements:
            if imp.criterion_id not in known:
                raise ValueError(f"improvement references unknown criterion id {imp.criterion_id}")


# The three default criteria every session starts with.
DEFAULT_CRITERIA: tuple[Criterion, ...] = (
    Criterion(
        id=1,
        name="Novelty",
        description="The research idea presents a new and original contribution to the field.",
        is_default=True,
    ),
    Criterion(
        id=2,
        name="Feasibility",
        description="The research can be completed with available resources and within a reasonable timeframe.",
        is_default=True,
    ),
    Criterion(
        id=3,
        name="Impact",
        description="The research has potential to make a significant contribution to its domain.",
        is_default=True,
    ),
)


def default_criteria() -> list[Criterion]:
    """Fresh copies of the default criteria (callers may mutate their list)."""
    return [Criterion(c.id, c.name, c.description, c.is_default) for c in DEFAULT_CRITERIA]


def proposal_fingerprint(sections: Mapping[SectionKind, str]) -> str:
    """Content hash binding an evaluation report to the exact section texts
    it assessed. Any section edit changes the fingerprint."""
    digest = hashlib.sha256()
    for kind in SectionKind:
        digest.update(kind.name.encode("utf-8"))
        digest.update(b"\x00")
        digest.update(sections.get(kind, "").encode("utf-8"))
        digest.update(b"\x01")
    return digest.hexdigest()
