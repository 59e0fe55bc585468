"""Shared fixtures: the fixture corpus, deterministic clocks and ids, fake
search/web clients, and a replay-stack factory wiring gateway + retrieval +
workflow offline."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

from ideasmith.gateway import LLMGateway, RoleAssignment, Transcript
from ideasmith.model import Origin, SectionKind
from ideasmith.provenance import StepLog, VersionStore
from ideasmith.retrieval import (
    HashingEmbedder,
    PaperRecord,
    PaperSection,
    PaperSource,
    RetrievalConfig,
    RetrievalPipeline,
    Snippet,
    VectorIndex,
)
from ideasmith.telemetry import TelemetryLog
from ideasmith.workflow import Workflow

DATA_DIR = Path(__file__).parent / "data"

ASSIGNMENT = RoleAssignment(
    ideator_model="writer-model",
    writer_model="writer-model",
    evaluator_model="evaluator-model",
)


def load_corpus() -> list[PaperRecord]:
    papers = []
    for line in (DATA_DIR / "corpus.jsonl").read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        papers.append(
            PaperRecord(
                citation_id=record["citation_id"],
                title=record["title"],
                authors=record["authors"],
                year=record["year"],
                abstract=record["abstract"],
                source=PaperSource(record["source"]),
                url=record["url"],
                venue=record["venue"],
                sections=[PaperSection(label, text) for label, text in record["sections"]],
            )
        )
    return papers


@pytest.fixture(scope="session")
def corpus() -> list[PaperRecord]:
    return load_corpus()


class TickingClock:
    """Deterministic clock advancing one second per call."""

    def __init__(self, start: datetime | None = None, step_seconds: float = 1.0):
        self.current = start or datetime(2025, 6, 15, 12, 0, 0, tzinfo=timezone.utc)
        self.step = timedelta(seconds=step_seconds)

    def __call__(self) -> datetime:
        value = self.current
        self.current = self.current + self.step
        return value

    def advance(self, seconds: float) -> None:
        self.current = self.current + timedelta(seconds=seconds)


def id_factory(prefix: str = "id"):
    counter = itertools.count(1)
    return lambda: f"{prefix}-{next(counter):04d}"


class FixtureSearchClient:
    """Search client serving canned papers regardless of query."""

    def __init__(self, papers: list[PaperRecord], name: str = "fixture"):
        self.name = name
        self._papers = papers
        self.calls: list[tuple[str, int]] = []

    def search(self, query: str, limit: int) -> list[PaperRecord]:
        self.calls.append((query, limit))
        out = []
        for paper in self._papers[:limit]:
            out.append(
                PaperRecord(
                    citation_id="",
                    title=paper.title,
                    authors=list(paper.authors),
                    year=paper.year,
                    abstract=paper.abstract,
                    source=paper.source,
                    url=paper.url,
                    venue=paper.venue,
                    sections=list(paper.sections),
                )
            )
        return out


class FailingSearchClient:
    def __init__(self, name: str = "down"):
        self.name = name

    def search(self, query: str, limit: int) -> list[PaperRecord]:
        raise ConnectionError(f"{self.name} is unreachable")


class FixtureWebClient:
    name = "fixture-web"

    def __init__(self, snippets: list[Snippet] | None = None, fail: bool = False):
        self._snippets = snippets or [
            Snippet(url=f"https://web.example/{i}", text=f"web snippet {i} " + "x" * 40)
            for i in range(8)
        ]
        self.fail = fail

    def search(self, query: str, n: int) -> list[Snippet]:
        if self.fail:
            raise ConnectionError("web search down")
        return self._snippets[:n]


@dataclass
class Stack:
    """Everything wired for offline runs."""

    transcript: Transcript
    gateway: LLMGateway
    config: RetrievalConfig
    index: VectorIndex
    pipeline: RetrievalPipeline
    versions: VersionStore
    steps: StepLog
    telemetry: TelemetryLog
    workflow: Workflow
    clock: TickingClock

    def top_papers(
        self, query_text: str, kind: SectionKind | None, n: int = 2, pinned: tuple = ()
    ) -> list[str]:
        """Paper ids retrieval will surface for a query; used to write canned
        section texts whose citations are guaranteed to be in context."""
        embedding = self.index.embed_text(query_text)
        scored = self.index.retrieve(embedding, kind, pinned=list(pinned))
        ids: list[str] = []
        for sc in scored:
            if sc.chunk.paper not in ids:
                ids.append(sc.chunk.paper)
            if len(ids) >= n:
                break
        return ids


def make_stack(
    corpus: list[PaperRecord] | None = None,
    *,
    search_clients: list | None = None,
    web_client=None,
    ingest: bool = True,
    config: RetrievalConfig | None = None,
) -> Stack:
    transcript = Transcript()
    gateway = LLMGateway(assignment=ASSIGNMENT, transcript=transcript)
    config = config or RetrievalConfig()
    index = VectorIndex(HashingEmbedder(config.embedding_dimension), config)
    pipeline = RetrievalPipeline(
        gateway,
        index,
        search_clients if search_clients is not None else [],
        web_client,
        config=config,
    )
    if corpus and ingest:
        pipeline.ingest(corpus)
    clock = TickingClock()
    versions = VersionStore(clock=clock)
    steps = StepLog(clock=clock)
    workflow = Workflow(
        gateway,
        pipeline,
        versions,
        steps,
        clock=clock,
        id_factory=id_factory("sess"),
    )
    return Stack(
        transcript=transcript,
        gateway=gateway,
        config=config,
        index=index,
        pipeline=pipeline,
        versions=versions,
        steps=steps,
        telemetry=TelemetryLog(clock=clock),
        workflow=workflow,
        clock=clock,
    )


@pytest.fixture
def stack(corpus) -> Stack:
    return make_stack(corpus)


ABSTRACT_TEXT = (
    "This study examines developer sentiment analysis and toxicity detection in "
    "open source software security, proposing a dashboard that correlates "
    "contributor sentiment trends with security vulnerability reports to "
    "support proactive interventions in software ecosystems."
)

IDEA_LINES = [
    "Create a real-time dashboard that tracks developer sentiment and toxicity in open source projects",
    "Correlate contributor toxicity trends with security vulnerability introduction rates",
    "Design interventions that mitigate toxic interactions in code review",
    "Model maintainer burnout from sentiment signals in issue trackers",
]


def script_ideation(stack: Stack, num_ideas: int = 4) -> None:
    stack.transcript.add_for_template(
        Origin.IDEATOR,
        "query_rewrite",
        "developer sentiment analysis toxicity detection open source software security vulnerabilities",
    )
    stack.transcript.add_for_template(
        Origin.IDEATOR, "ideation", "\n".join(IDEA_LINES[:num_ideas])
    )


def section_text(kind: SectionKind, cited: list[str], tag: str = "") -> str:
    """Deterministic section body citing the given paper ids."""
    marks = " ".join(f"[CITATION: {cid}]" for cid in cited)
    if kind is SectionKind.LITERATURE_SYNTHESIS:
        return (
            f"Prior work studies sentiment and toxicity in software teams {marks}. "
            f"Gaps remain in linking affect to security outcomes.{tag}"
        )
    if kind is SectionKind.RESEARCH_GOALS:
        return (
            f"This study aims to link sentiment with vulnerabilities {marks}. "
            f"RQ1: How does toxicity correlate with vulnerability introduction? "
            f"RQ2: Which interventions reduce toxic exchanges?{tag}"
        )
    return (
        f"We will mine repositories, run sentiment models, and correlate signals "
        f"with vulnerability data {marks}. The pipeline runs longitudinally.{tag}"
    )


def script_full_pass(stack: Stack, tag: str = "", pinned: tuple = ()) -> dict[SectionKind, list[str]]:
    """Queue the hypothetical abstract plus three section drafts whose
    citations are exactly the papers retrieval will surface. Returns the
    cited ids per section."""
    stack.transcript.add_for_template(Origin.WRITER, "hypothetical_abstract", ABSTRACT_TEXT)
    cited: dict[SectionKind, list[str]] = {}
    for kind in SectionKind:
        ids = stack.top_papers(ABSTRACT_TEXT, kind, n=2, pinned=pinned)
        cited[kind] = ids
        template = {
            SectionKind.LITERATURE_SYNTHESIS: "literature",
            SectionKind.RESEARCH_GOALS: "goals",
            SectionKind.STUDY_PLAN: "plan",
        }[kind]
        stack.transcript.add_for_template(
            Origin.WRITER, template, section_text(kind, ids, tag)
        )
    return cited


CRITIQUES_JSON = json.dumps(
    {
        "evaluations": [
            {"criteriaId": 1, "reflections": ["The direction is adjacent to prior dashboards."]},
            {"criteriaId": 2, "reflections": ["Data access for private repositories is uncertain."]},
            {"criteriaId": 3, "reflections": ["Healthier ecosystems would have broad practical impact."]},
        ]
    }
)

SUGGESTIONS_JSON = json.dumps(
    {
        "improvements": [
            {
                "criteriaId": 1,
                "criteriaName": "Novelty",
                "suggestions": ["Differentiate from existing sentiment dashboards."],
            },
            {
                "criteriaId": 2,
                "criteriaName": "Feasibility",
                "suggestions": ["Scope the study to ten high-activity repositories."],
            },
            {
                "criteriaId": 3,
                "criteriaName": "Impact",
                "suggestions": ["Add concrete intervention strategies for maintainers."],
            },
        ]
    }
)


def script_evaluation(stack: Stack) -> None:
    stack.transcript.add_for_template(Origin.EVALUATOR, "critiques", CRITIQUES_JSON)


def script_suggestions(stack: Stack) -> None:
    stack.transcript.add_for_template(Origin.EVALUATOR, "suggestions", SUGGESTIONS_JSON)


def script_revision_round(
    stack: Stack, refined_idea: str, tag: str = "", pinned: tuple = ()
) -> None:
    """Queue one apply-improvements round: idea revision, new abstract, and
    three section revisions citing in-context papers."""
    stack.transcript.add_for_template(Origin.IDEATOR, "idea_revision", refined_idea)
    stack.transcript.add_for_template(
        Origin.WRITER, "hypothetical_abstract", ABSTRACT_TEXT + " Revised focus." + tag
    )
    for kind in SectionKind:
        ids = stack.top_papers(ABSTRACT_TEXT + " Revised focus." + tag, kind, n=2, pinned=pinned)
        stack.transcript.add_for_template(
            Origin.WRITER, "revising", section_text(kind, ids, tag or " (revised)")
        )
