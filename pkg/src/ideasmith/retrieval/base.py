"""Shared retrieval types and configuration."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from ..model import SectionKind

__all__ = [
    "CANONICAL_SECTION_LABELS",
    "Chunk",
    "EnhancedQuery",
    "PaperRecord",
    "PaperSection",
    "PaperSource",
    "RetrievalConfig",
    "ScoredChunk",
    "Snippet",
]

CANONICAL_SECTION_LABELS = (
    "introduction",
    "related_work",
    "methods",
    "results",
    "discussion",
    "other",
)


class PaperSource(str, Enum):
    SEMANTIC_SCHOLAR = "semantic_scholar"
    ARXIV = "arxiv"


@dataclass(frozen=True)
class PaperSection:
    label: str
    text: str


@dataclass
class PaperRecord:
    """One paper as returned by academic search, identified by the citation
    token used in generated text. Sections may be empty (abstract-only)."""

    citation_id: str
    title: str
    authors: list[str]
    year: int
    abstract: str
    source: PaperSource
    url: str = ""
    venue: str | None = None
    sections: list[PaperSection] = field(default_factory=list)


@dataclass
class Chunk:
    """A section-labeled paper fragment; the retrieval unit of long-term
    memory. The embedding is attached when the chunk is indexed."""

    chunk_id: str
    paper: str
    section_label: str
    text: str
    embedding: tuple[float, ...] | None = None


@dataclass(frozen=True)
class ScoredChunk:
    """A chunk scored against a query: raw cosine plus the section-priority
    boost applied when its label maps to the target proposal section."""

    chunk: Chunk
    base_score: float
    boosted_score: float


@dataclass
class EnhancedQuery:
    """The hypothetical abstract generated from a seed idea, embedded and
    persisted so retrieval reuses it across the session."""

    seed_idea_id: str
    hypothetical_abstract: str
    embedding: tuple[float, ...]


@dataclass(frozen=True)
class Snippet:
    """Open-web snippet used to enrich prompts. Never cited."""

    url: str
    text: str


def _default_section_map() -> dict[SectionKind, frozenset[str]]:
    # Only methods -> study plan is externally given; the rest extends the
    # same alignment idea to the other two sections.
    return {
        SectionKind.LITERATURE_SYNTHESIS: frozenset({"introduction", "related_work", "other"}),
        SectionKind.RESEARCH_GOALS: frozenset({"introduction", "discussion"}),
        SectionKind.STUDY_PLAN: frozenset({"methods", "results"}),
    }


@dataclass
class RetrievalConfig:
    k: int = 8
    priority_boost: float = 0.15
    max_chunk_chars: int = 2000
    embedding_dimension: int = 256
    max_chunks_per_paper: int = 2
    search_limit: int = 25
    snippet_count: int = 5
    snippet_max_chars: int = 500
    section_map: dict[SectionKind, frozenset[str]] = field(default_factory=_default_section_map)

    def __post_init__(self) -> None:
        if self.k <= 0:
            raise ValueError("k must be positive")
        if self.priority_boost < 0:
            raise ValueError("priority_boost must be >= 0")
        for kind in SectionKind:
            if kind not in self.section_map:
                raise ValueError(f"section_map must be total over SectionKind (missing {kind})")
