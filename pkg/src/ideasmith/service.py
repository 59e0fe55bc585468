"""HTTP/JSON API over sessions, workflow, provenance, and telemetry.

Every mutating route goes through the gate before touching the workflow and
emits its telemetry events only after the handler succeeded (exactly-once per
successful mutating request; failed requests emit nothing). Gating denials
surface as 403 with a reason code, an in-flight generation as 409, provider
failures as 502 carrying a step-log reference.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import archive
from .agents import DuplicateCriterion, OutputShapeError
from .gateway import (
    ConfigError,
    HTTPChatProvider,
    LLMGateway,
    Provider,
    ProviderError,
    ReplayExhausted,
    RoleAssignment,
    StructuredOutputError,
    Transcript,
    assign_models,
)
from .model import ControlLevel, SectionKind, UserAction, Vote
from .provenance import StepLog, UnknownVersion, VersionStore
from .retrieval import (
    ArxivClient,
    DuckDuckGoClient,
    HashingEmbedder,
    RetrievalConfig,
    RetrievalPipeline,
    SearchClient,
    SemanticScholarClient,
    SourceUnavailable,
    VectorIndex,
    WebSearchClient,
)
from .telemetry import Metric, NoEvents, TelemetryLog, metrics_report
from .workflow import (
    Busy,
    GatingDenied,
    NoVersion,
    Session,
    UnknownEntity,
    Workflow,
    gate,
    require_gate,
)

__all__ = ["AppState", "ServiceConfig", "build_state", "create_app"]


@dataclass
class ServiceConfig:
    """Environment-driven configuration: provider keys, model ids, retrieval
    defaults, and the default control level."""

    models: dict[str, str] = field(default_factory=dict)
    llm_base_url: str | None = None
    llm_api_key: str | None = None
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    default_level: ControlLevel = ControlLevel.INTENSIVE
    index_path: str | None = None
    data_dir: str | None = None
    semantic_scholar_api_key: str | None = None
    enable_web_search: bool = True

    @classmethod
    def from_env(cls, env: dict[str, str] | None = None) -> "ServiceConfig":
        env = dict(os.environ if env is None else env)
        models = {}
        for role in ("ideator", "writer", "evaluator"):
            value = env.get(f"IDEASMITH_{role.upper()}_MODEL")
            if value:
                models[role] = value
        retrieval = RetrievalConfig(
            k=int(env.get("IDEASMITH_TOP_K", 8)),
            priority_boost=float(env.get("IDEASMITH_PRIORITY_BOOST", 0.15)),
        )
        return cls(
            models=models,
            llm_base_url=env.get("IDEASMITH_LLM_BASE_URL"),
            llm_api_key=env.get("IDEASMITH_LLM_API_KEY"),
            retrieval=retrieval,
            default_level=ControlLevel(env.get("IDEASMITH_DEFAULT_LEVEL", "intensive")),
            index_path=env.get("IDEASMITH_INDEX_PATH"),
            data_dir=env.get("IDEASMITH_DATA_DIR"),
            semantic_scholar_api_key=env.get("SEMANTIC_SCHOLAR_API_KEY"),
            enable_web_search=env.get("IDEASMITH_WEB_SEARCH", "1") != "0",
        )


@dataclass
class AppState:
    config: ServiceConfig
    workflow: Workflow
    versions: VersionStore
    steps: StepLog
    telemetry: TelemetryLog
    sessions: dict[str, Session] = field(default_factory=dict)

    def session(self, session_id: str) -> Session:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise UnknownEntity(f"no session {session_id}") from None

    def persist(self, session_id: str) -> None:
        """Write one session's archive into the service-owned document store
        (one document per session). No-op without a data dir."""
        if self.config.data_dir is None:
            return
        session = self.sessions.get(session_id)
        if session is None:
            return
        directory = Path(self.config.data_dir)
        directory.mkdir(parents=True, exist_ok=True)
        bundle = archive.export_session(session, self.versions, self.steps, self.telemetry)
        path = directory / f"{session.id}.json"
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(archive.to_json(bundle), encoding="utf-8")
        tmp.replace(path)

    def load_persisted(self) -> int:
        if self.config.data_dir is None:
            return 0
        directory = Path(self.config.data_dir)
        if not directory.is_dir():
            return 0
        loaded = 0
        for path in sorted(directory.glob("*.json")):
            bundle = json.loads(path.read_text(encoding="utf-8"))
            session = archive.import_session(bundle, self.versions, self.steps, self.telemetry)
            self.sessions[session.id] = session
            loaded += 1
        return loaded


def build_state(
    config: ServiceConfig | None = None,
    *,
    provider: Provider | None = None,
    transcript: Transcript | None = None,
    search_clients: list[SearchClient] | None = None,
    web_client: WebSearchClient | None = None,
    assignment: RoleAssignment | None = None,
    **workflow_kwargs: Any,
) -> AppState:
    """Wire the full stack. Tests pass a replay transcript and fixture
    search clients; production wiring comes from the config."""
    config = config or ServiceConfig()
    assignment = assignment or assign_models(config.models)
    if provider is None and transcript is None:
        if config.llm_base_url:
            provider = HTTPChatProvider(config.llm_base_url, config.llm_api_key)
        else:
            raise ConfigError(
                "no LLM access configured: set IDEASMITH_LLM_BASE_URL or pass a transcript"
            )
    gateway = LLMGateway(assignment=assignment, provider=provider, transcript=transcript)
    index = VectorIndex(
        HashingEmbedder(config.retrieval.embedding_dimension),
        config.retrieval,
        path=Path(config.index_path) if config.index_path else None,
    )
    if search_clients is None:
        search_clients = [
            SemanticScholarClient(api_key=config.semantic_scholar_api_key),
            ArxivClient(),
        ]
    if web_client is None and config.enable_web_search:
        web_client = DuckDuckGoClient()
    pipeline = RetrievalPipeline(
        gateway, index, search_clients, web_client, config=config.retrieval
    )
    versions = VersionStore()
    steps = StepLog()
    workflow = Workflow(gateway, pipeline, versions, steps, **workflow_kwargs)
    state = AppState(
        config=config,
        workflow=workflow,
        versions=versions,
        steps=steps,
        telemetry=TelemetryLog(),
    )
    state.load_persisted()
    return state


# -- request payloads ---------------------------------------------------------


class CreateSession(BaseModel):
    keywords: str
    level: str | None = None


class IdeasRequest(BaseModel):
    num_ideas: int | None = None


class IdeaUpdate(BaseModel):
    idea_id: str
    text: str | None = None


class SearchRequest(BaseModel):
    query: str
    limit: int | None = None


class PinRequest(BaseModel):
    citation_ids: list[str]


class SectionPrompt(BaseModel):
    instruction: str


class InlineEdit(BaseModel):
    start: int
    end: int
    instruction: str


class DirectEdit(BaseModel):
    text: str


class CriterionRequest(BaseModel):
    name: str | None = None
    description: str | None = None
    generate: bool = False


class VoteRequest(BaseModel):
    vote: str


class ApplyImprovements(BaseModel):
    improvement_ids: list[int]
    customized: dict[int, str] | None = None


class IterateRequest(BaseModel):
    max_rounds: int = 1


class RevertRequest(BaseModel):
    seq: int


# -- serialization ------------------------------------------------------------


def _idea_view(idea: Any) -> dict[str, Any]:
    return {
        "id": idea.id,
        "text": idea.text,
        "source_keywords": idea.source_keywords,
        "abstract": idea.abstract,
    }


def _session_view(session: Session, versions: VersionStore) -> dict[str, Any]:
    proposal = session.active_proposal
    sections = {}
    if proposal:
        for kind, seq in proposal.sections.items():
            record = versions.get(proposal.id, kind, seq)
            sections[kind.slug] = {"seq": seq, "text": record.content}
    report = session.last_report
    return {
        "id": session.id,
        "level": session.level.value,
        "keywords": session.keywords,
        "created_at": session.created_at.isoformat(),
        "gating": {action.value: gate(action, session.level) for action in UserAction},
        "ideas": [_idea_view(i) for i in session.ideas],
        "active_idea_id": session.active_idea_id,
        "criteria": [
            {"id": c.id, "name": c.name, "description": c.description, "is_default": c.is_default}
            for c in session.criteria
        ],
        "pinned_papers": session.pinned_papers,
        "proposal": None
        if proposal is None
        else {"id": proposal.id, "status": proposal.status.value, "sections": sections},
        "report": None if report is None else _report_view(report),
    }


def _report_view(report: Any) -> dict[str, Any]:
    return {
        "fingerprint": report.proposal_version_fingerprint,
        "criteria": [{"id": c.id, "name": c.name, "description": c.description} for c in report.criteria],
        "reflections": {
            str(cid): [{"text": r.text, "vote": r.vote.value if r.vote else None} for r in rs]
            for cid, rs in report.reflections.items()
        },
        "improvements": [
            {
                "criterion_id": i.criterion_id,
                "criterion_name": i.criterion_name,
                "suggestions": i.suggestions,
                "selected": i.selected,
                "customized_text": i.customized_text,
            }
            for i in report.improvements
        ],
    }


def _paper_view(paper: Any) -> dict[str, Any]:
    return {
        "citation_id": paper.citation_id,
        "title": paper.title,
        "authors": paper.authors,
        "year": paper.year,
        "venue": paper.venue,
        "abstract": paper.abstract,
        "source": paper.source.value,
        "url": paper.url,
    }


# -- application ---------------------------------------------------------------


def create_app(state: AppState) -> FastAPI:
    app = FastAPI(title="ideasmith", version="0.1.0")
    app.state.ideasmith = state

    wf = state.workflow

    def emit(session: Session, metric: Metric, payload: str | None = None, count: int = 1) -> None:
        for _ in range(count):
            state.telemetry.record(session.id, metric, payload)

    if state.config.data_dir is not None:

        @app.middleware("http")
        async def _persist_mutations(request: Request, call_next):
            response = await call_next(request)
            if request.method in ("POST", "PUT") and response.status_code < 400:
                parts = request.url.path.strip("/").split("/")
                if len(parts) >= 2 and parts[0] == "sessions" and parts[1] in state.sessions:
                    state.persist(parts[1])
            return response

    @app.exception_handler(GatingDenied)
    async def _gating_denied(_: Request, exc: GatingDenied) -> JSONResponse:
        return JSONResponse(
            status_code=403,
            content={
                "error": "gating_denied",
                "action": exc.action.value,
                "level": exc.level.value,
                "reason": exc.reason,
            },
        )

    @app.exception_handler(Busy)
    async def _busy(_: Request, exc: Busy) -> JSONResponse:
        return JSONResponse(status_code=409, content={"error": "busy", "detail": str(exc)})

    @app.exception_handler(UnknownEntity)
    async def _unknown(_: Request, exc: UnknownEntity) -> JSONResponse:
        return JSONResponse(status_code=404, content={"error": "not_found", "detail": str(exc)})

    @app.exception_handler(UnknownVersion)
    async def _unknown_version(_: Request, exc: UnknownVersion) -> JSONResponse:
        return JSONResponse(status_code=404, content={"error": "unknown_version", "detail": str(exc)})

    @app.exception_handler(NoVersion)
    async def _no_version(_: Request, exc: NoVersion) -> JSONResponse:
        return JSONResponse(status_code=404, content={"error": "no_version", "detail": str(exc)})

    @app.exception_handler(ValueError)
    async def _bad_request(_: Request, exc: ValueError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"error": "bad_request", "detail": str(exc)})

    @app.exception_handler(NoEvents)
    async def _no_events(_: Request, exc: NoEvents) -> JSONResponse:
        return JSONResponse(status_code=400, content={"error": "no_events", "detail": str(exc)})

    def _provider_failure(session_id: str, exc: Exception) -> JSONResponse:
        steps = state.steps.for_session(session_id)
        return JSONResponse(
            status_code=502,
            content={
                "error": "provider_failure",
                "detail": str(exc),
                "step_ref": steps[-1].seq if steps else None,
            },
        )

    @app.exception_handler(ProviderError)
    async def _provider(request: Request, exc: ProviderError) -> JSONResponse:
        return _provider_failure(request.path_params.get("session_id", ""), exc)

    @app.exception_handler(StructuredOutputError)
    async def _structured(request: Request, exc: StructuredOutputError) -> JSONResponse:
        return _provider_failure(request.path_params.get("session_id", ""), exc)

    @app.exception_handler(ReplayExhausted)
    async def _replay(request: Request, exc: ReplayExhausted) -> JSONResponse:
        return _provider_failure(request.path_params.get("session_id", ""), exc)

    @app.exception_handler(SourceUnavailable)
    async def _source(_: Request, exc: SourceUnavailable) -> JSONResponse:
        return JSONResponse(status_code=502, content={"error": "source_unavailable", "detail": str(exc)})

    @app.exception_handler(OutputShapeError)
    async def _shape(_: Request, exc: OutputShapeError) -> JSONResponse:
        return JSONResponse(status_code=502, content={"error": "output_shape", "detail": str(exc)})

    @app.exception_handler(DuplicateCriterion)
    async def _dup_criterion(_: Request, exc: DuplicateCriterion) -> JSONResponse:
        return JSONResponse(status_code=502, content={"error": "duplicate_criterion", "detail": str(exc)})

    # -- sessions --

    @app.post("/sessions")
    def create_session(payload: CreateSession) -> dict[str, Any]:
        level = ControlLevel(payload.level) if payload.level else state.config.default_level
        session = wf.start_session(payload.keywords, level)
        state.sessions[session.id] = session
        state.persist(session.id)
        return _session_view(session, state.versions)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict[str, Any]:
        return _session_view(state.session(session_id), state.versions)

    @app.post("/sessions/{session_id}/ideas")
    def generate_ideas(session_id: str, payload: IdeasRequest) -> dict[str, Any]:
        session = state.session(session_id)
        witness = require_gate(UserAction.GENERATE_SEED_IDEAS, session.level)
        ideas = wf.generate_seed_ideas(session, witness, payload.num_ideas)
        emit(session, Metric.GENERATE_SEED_IDEAS)
        return {"ideas": [_idea_view(i) for i in ideas]}

    @app.put("/sessions/{session_id}/idea")
    def update_idea(session_id: str, payload: IdeaUpdate) -> dict[str, Any]:
        session = state.session(session_id)
        witness = require_gate(UserAction.CUSTOMIZE_SEED_IDEA, session.level)
        if payload.text is not None:
            idea = wf.customize_idea(session, payload.idea_id, payload.text, witness)
        else:
            idea = wf.select_idea(session, payload.idea_id, witness)
        return {"idea": _idea_view(idea), "active_idea_id": session.active_idea_id}

    # -- literature --

    @app.post("/sessions/{session_id}/search")
    def search(session_id: str, payload: SearchRequest) -> dict[str, Any]:
        session = state.session(session_id)
        witness = require_gate(UserAction.SEARCH_SELECT_LITERATURE, session.level)
        results = wf.search_literature(session, payload.query, witness, payload.limit)
        emit(session, Metric.QUERY_SEARCHES, payload.query)
        return {"results": [_paper_view(p) for p in results]}

    @app.get("/sessions/{session_id}/search")
    def last_search(session_id: str) -> dict[str, Any]:
        session = state.session(session_id)
        return {"results": [_paper_view(p) for p in session.search_results]}

    @app.post("/sessions/{session_id}/search/pin")
    def pin(session_id: str, payload: PinRequest) -> dict[str, Any]:
        session = state.session(session_id)
        witness = require_gate(UserAction.SEARCH_SELECT_LITERATURE, session.level)
        before = set(session.pinned_papers)
        pinned = wf.pin_papers(session, payload.citation_ids, witness)
        newly = [cid for cid in pinned if cid not in before]
        for cid in newly:
            emit(session, Metric.SELECT_PAPERS, cid)
        return {"pinned": pinned}

    # -- drafting --

    @app.post("/sessions/{session_id}/proposal")
    def generate_proposal(session_id: str) -> dict[str, Any]:
        session = state.session(session_id)
        witness = require_gate(UserAction.PROMPT_FULL_PROPOSAL, session.level)
        wf.generate_full_proposal(session, witness)
        emit(session, Metric.PROMPT_FULL_PROPOSAL)
        return _session_view(session, state.versions)

    @app.post("/sessions/{session_id}/sections/{kind}/prompt")
    def prompt_section(session_id: str, kind: str, payload: SectionPrompt) -> dict[str, Any]:
        session = state.session(session_id)
        section = SectionKind.from_slug(kind)
        witness = require_gate(UserAction.PROMPT_SECTION, session.level)
        revised = wf.prompt_section(session, section, payload.instruction, witness)
        emit(session, Metric.PROMPT_PROPOSAL_SECTION, kind)
        return {
            "section": kind,
            "seq": revised.seq,
            "text": revised.text,
            "span_overreach": revised.span_overreach,
        }

    @app.post("/sessions/{session_id}/sections/{kind}/inline-edit")
    def inline_edit(session_id: str, kind: str, payload: InlineEdit) -> dict[str, Any]:
        session = state.session(session_id)
        section = SectionKind.from_slug(kind)
        witness = require_gate(UserAction.HIGHLIGHT_FOR_EDIT, session.level)
        revised = wf.inline_edit(
            session, section, (payload.start, payload.end), payload.instruction, witness
        )
        emit(session, Metric.INLINE_TEXT_PROMPTING, kind)
        return {
            "section": kind,
            "seq": revised.seq,
            "text": revised.text,
            "span_overreach": revised.span_overreach,
        }

    @app.put("/sessions/{session_id}/sections/{kind}")
    def direct_edit(session_id: str, kind: str, payload: DirectEdit) -> dict[str, Any]:
        session = state.session(session_id)
        section = SectionKind.from_slug(kind)
        witness = require_gate(UserAction.DIRECT_EDIT, session.level)
        revised = wf.direct_edit(session, section, payload.text, witness)
        emit(session, Metric.SAVE_EDITS, kind)
        return {"section": kind, "seq": revised.seq, "text": revised.text}

    # -- evaluation --

    @app.post("/sessions/{session_id}/criteria")
    def add_criterion(session_id: str, payload: CriterionRequest) -> dict[str, Any]:
        session = state.session(session_id)
        witness = require_gate(UserAction.CUSTOMIZE_CRITERIA, session.level)
        criterion = wf.add_criterion(
            session,
            witness,
            name=None if payload.generate else payload.name,
            description=None if payload.generate else payload.description,
        )
        return {
            "criterion": {
                "id": criterion.id,
                "name": criterion.name,
                "description": criterion.description,
            }
        }

    @app.post("/sessions/{session_id}/evaluate")
    def evaluate(session_id: str) -> dict[str, Any]:
        session = state.session(session_id)
        report = wf.evaluate(session)
        return {"report": _report_view(report)}

    @app.post("/sessions/{session_id}/reflections/{criterion_id}/{index}/vote")
    def vote(session_id: str, criterion_id: int, index: int, payload: VoteRequest) -> dict[str, Any]:
        session = state.session(session_id)
        witness = require_gate(UserAction.FEEDBACK_ON_CRITIQUES, session.level)
        reflection = wf.record_feedback(session, criterion_id, index, Vote(payload.vote), witness)
        emit(session, Metric.PROVIDE_FEEDBACK, f"{criterion_id}:{index}")
        return {"reflection": {"text": reflection.text, "vote": reflection.vote.value}}

    @app.post("/sessions/{session_id}/reflections/{criterion_id}/more")
    def more_reflections(session_id: str, criterion_id: int) -> dict[str, Any]:
        session = state.session(session_id)
        witness = require_gate(UserAction.REQUEST_MORE_CRITIQUES, session.level)
        fresh = wf.more_critiques(session, criterion_id, witness)
        emit(session, Metric.REQUEST_MORE_CRITIQUES, str(criterion_id))
        return {"reflections": [{"text": r.text, "vote": None} for r in fresh]}

    @app.post("/sessions/{session_id}/improvements/suggest")
    def suggest(session_id: str) -> dict[str, Any]:
        session = state.session(session_id)
        improvements = wf.suggest_improvements(session)
        return {"improvements": _report_view(session.last_report)["improvements"] if improvements else []}

    @app.post("/sessions/{session_id}/improvements/apply")
    def apply_improvements(session_id: str, payload: ApplyImprovements) -> dict[str, Any]:
        session = state.session(session_id)
        witness = require_gate(UserAction.SELECT_IMPROVEMENTS, session.level)
        customize_witness = None
        if payload.customized:
            customize_witness = require_gate(UserAction.CUSTOMIZE_IMPROVEMENTS, session.level)
        wf.apply_improvements(
            session,
            payload.improvement_ids,
            witness,
            customized=payload.customized,
            customize_witness=customize_witness,
        )
        for cid in payload.improvement_ids:
            emit(session, Metric.SELECT_IMPROVEMENTS, str(cid))
        for cid in payload.customized or {}:
            emit(session, Metric.CUSTOMIZE_IMPROVEMENTS, str(cid))
        emit(session, Metric.REVISE_FULL_PROPOSAL)
        return _session_view(session, state.versions)

    @app.post("/sessions/{session_id}/iterate")
    def iterate(session_id: str, payload: IterateRequest) -> dict[str, Any]:
        session = state.session(session_id)
        require_gate(UserAction.SELECT_IMPROVEMENTS, session.level)
        before = len(session.reports)

        def accept(*_: Any) -> bool:
            return False

        wf.auto_iterate(session, max_rounds=payload.max_rounds, accept=accept)
        applied_rounds = 0
        for report in session.reports[before:]:
            selected = [i for i in report.improvements if i.selected]
            if selected:
                applied_rounds += 1
                for improvement in selected:
                    emit(session, Metric.SELECT_IMPROVEMENTS, str(improvement.criterion_id))
        for _ in range(applied_rounds):
            emit(session, Metric.REVISE_FULL_PROPOSAL)
        return _session_view(session, state.versions)

    # -- provenance --

    @app.get("/sessions/{session_id}/sections/{kind}/history")
    def history(session_id: str, kind: str) -> dict[str, Any]:
        session = state.session(session_id)
        proposal = session.active_proposal
        if proposal is None:
            raise UnknownEntity(f"session {session_id} has no proposal")
        section = SectionKind.from_slug(kind)
        return {
            "versions": [
                {
                    "seq": v.seq,
                    "origin": v.origin.value,
                    "parent_seq": v.parent_seq,
                    "created_at": v.created_at.isoformat(),
                    "content": v.content,
                }
                for v in state.versions.history(proposal.id, section)
            ]
        }

    @app.post("/sessions/{session_id}/sections/{kind}/revert")
    def revert(session_id: str, kind: str, payload: RevertRequest) -> dict[str, Any]:
        session = state.session(session_id)
        section = SectionKind.from_slug(kind)
        witness = require_gate(UserAction.REVERT_VERSION, session.level)
        revised = wf.revert(session, section, payload.seq, witness)
        return {"section": kind, "seq": revised.seq, "text": revised.text}

    @app.get("/sessions/{session_id}/steps")
    def steps(session_id: str) -> dict[str, Any]:
        state.session(session_id)
        return {
            "steps": [
                {
                    "seq": s.seq,
                    "role": s.role.value,
                    "operation": s.operation,
                    "status": s.status.value,
                    "detail": s.detail,
                    "started_at": s.started_at.isoformat(),
                    "ended_at": s.ended_at.isoformat(),
                }
                for s in state.steps.for_session(session_id)
            ]
        }

    # -- lifecycle, telemetry, export --

    @app.post("/sessions/{session_id}/save")
    def save(session_id: str) -> dict[str, Any]:
        session = state.session(session_id)
        proposal = wf.save_proposal(session)
        emit(session, Metric.UNIQUE_RESEARCH_PROPOSALS, proposal.id)
        return {"proposal_id": proposal.id, "status": proposal.status.value}

    @app.post("/sessions/{session_id}/close")
    def close(session_id: str) -> dict[str, Any]:
        session = state.session(session_id)
        wf.close_session(session)
        return {"closed_at": session.closed_at.isoformat()}  # type: ignore[union-attr]

    @app.get("/sessions/{session_id}/metrics")
    def metrics(session_id: str) -> dict[str, Any]:
        session = state.session(session_id)
        report = metrics_report(
            state.telemetry.events(session_id),
            session_id=session_id,
            created_at=session.created_at,
            closed_at=session.closed_at,
            now=state.workflow.now(),
        )
        return {
            "session_id": report.session_id,
            "duration_seconds": report.duration_seconds,
            "duration_basis": report.duration_basis,
            "counts": report.counts,
            "rates": report.rates,
        }

    @app.get("/sessions/{session_id}/export")
    def export(session_id: str, format: str = "json"):
        session = state.session(session_id)
        bundle = archive.export_session(session, state.versions, state.steps, state.telemetry)
        if format == "jsonl":
            from fastapi.responses import PlainTextResponse

            return PlainTextResponse("\n".join(archive.to_record_lines(bundle)) + "\n")
        return bundle

    @app.post("/sessions/import")
    def import_(payload: dict[str, Any]) -> dict[str, Any]:
        session = archive.import_session(payload, state.versions, state.steps, state.telemetry)
        state.sessions[session.id] = session
        state.persist(session.id)
        return _session_view(session, state.versions)

    return app
