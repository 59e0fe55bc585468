"""Lossless session archives: proposals with full version histories, ideas,
evaluation reports, the agent-step trace, and telemetry events.

Export -> import -> export round-trips byte-identically (archives are
serialized with sorted keys); timestamps are UTC ISO-8601.
"""

from __future__ import annotations

import json
from datetime import datetime
from typing import Any

from .model import (
    ControlLevel,
    Criterion,
    EvaluationReport,
    Improvement,
    Origin,
    Proposal,
    ProposalStatus,
    Reflection,
    SectionKind,
    SeedIdea,
    Vote,
)
from .provenance import AgentStep, StepLog, StepStatus, VersionRecord, VersionStore
from .telemetry import EventRecord, Metric, TelemetryLog
from .workflow import Session
from .retrieval import PaperRecord, PaperSection, PaperSource, Snippet

__all__ = ["export_session", "import_session", "to_json", "to_record_lines"]

ARCHIVE_FORMAT = "ideasmith-session/1"


def _ts(value: datetime) -> str:
    return value.isoformat()


def _parse_ts(value: str) -> datetime:
    return datetime.fromisoformat(value)


def _idea(idea: SeedIdea) -> dict[str, Any]:
    return {
        "id": idea.id,
        "text": idea.text,
        "source_keywords": list(idea.source_keywords),
        "abstract": idea.abstract,
        "enhanced_query_ref": idea.enhanced_query_ref,
    }


def _criterion(criterion: Criterion) -> dict[str, Any]:
    return {
        "id": criterion.id,
        "name": criterion.name,
        "description": criterion.description,
        "is_default": criterion.is_default,
    }


def _reflection(reflection: Reflection) -> dict[str, Any]:
    return {
        "criterion_id": reflection.criterion_id,
        "text": reflection.text,
        "vote": reflection.vote.value if reflection.vote else None,
    }


def _improvement(improvement: Improvement) -> dict[str, Any]:
    return {
        "criterion_id": improvement.criterion_id,
        "criterion_name": improvement.criterion_name,
        "suggestions": list(improvement.suggestions),
        "selected": improvement.selected,
        "customized_text": improvement.customized_text,
    }


def _report(report: EvaluationReport) -> dict[str, Any]:
    return {
        "fingerprint": report.proposal_version_fingerprint,
        "criteria": [_criterion(c) for c in report.criteria],
        "reflections": {
            str(cid): [_reflection(r) for r in rs] for cid, rs in report.reflections.items()
        },
        "improvements": [_improvement(i) for i in report.improvements],
    }


def _version(record: VersionRecord) -> dict[str, Any]:
    return {
        "section": record.section.slug,
        "seq": record.seq,
        "content": record.content,
        "citations": list(record.citations),
        "origin": record.origin.value,
        "parent_seq": record.parent_seq,
        "created_at": _ts(record.created_at),
    }


def _step(step: AgentStep) -> dict[str, Any]:
    return {
        "seq": step.seq,
        "session_id": step.session_id,
        "role": step.role.value,
        "operation": step.operation,
        "status": step.status.value,
        "detail": step.detail,
        "started_at": _ts(step.started_at),
        "ended_at": _ts(step.ended_at),
    }


def _event(event: EventRecord) -> dict[str, Any]:
    return {
        "timestamp": _ts(event.timestamp),
        "session_id": event.session_id,
        "metric": event.metric.value,
        "payload": event.payload,
    }


def _paper(paper: PaperRecord) -> dict[str, Any]:
    return {
        "citation_id": paper.citation_id,
        "title": paper.title,
        "authors": list(paper.authors),
        "year": paper.year,
        "abstract": paper.abstract,
        "source": paper.source.value,
        "url": paper.url,
        "venue": paper.venue,
        "sections": [[s.label, s.text] for s in paper.sections],
    }


def export_session(
    session: Session,
    versions: VersionStore,
    steps: StepLog,
    telemetry: TelemetryLog,
) -> dict[str, Any]:
    """Bundle everything about one session into a JSON-compatible archive."""
    proposals = []
    for proposal in session.proposals:
        proposals.append(
            {
                "id": proposal.id,
                "idea_id": proposal.idea.id,
                "status": proposal.status.value,
                "sections": {kind.slug: seq for kind, seq in sorted(proposal.sections.items())},
                "history": {
                    kind.slug: [_version(v) for v in versions.history(proposal.id, kind)]
                    for kind in SectionKind
                },
            }
        )
    return {
        "format": ARCHIVE_FORMAT,
        "session": {
            "id": session.id,
            "level": session.level.value,
            "keywords": session.keywords,
            "created_at": _ts(session.created_at),
            "closed_at": _ts(session.closed_at) if session.closed_at else None,
            "active_idea_id": session.active_idea_id,
            "original_idea_text": session.original_idea_text,
            "pinned_papers": list(session.pinned_papers),
        },
        "ideas": [_idea(i) for i in session.ideas],
        "criteria": [_criterion(c) for c in session.criteria],
        "search_results": [_paper(p) for p in session.search_results],
        "snippets": [{"url": s.url, "text": s.text} for s in session.snippets],
        "proposals": proposals,
        "reports": [_report(r) for r in session.reports],
        "steps": [_step(s) for s in steps.for_session(session.id)],
        "events": [_event(e) for e in telemetry.events(session.id)],
    }


def to_json(archive: dict[str, Any]) -> str:
    return json.dumps(archive, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def to_record_lines(archive: dict[str, Any]) -> list[str]:
    """Flatten an archive into one structured record per line (JSONL), the
    form used for offline log-style analysis of study sessions."""
    session_id = archive["session"]["id"]
    records: list[dict[str, Any]] = [{"record": "session", **archive["session"]}]
    for idea in archive["ideas"]:
        records.append({"record": "idea", "session_id": session_id, **idea})
    for criterion in archive["criteria"]:
        records.append({"record": "criterion", "session_id": session_id, **criterion})
    for proposal in archive["proposals"]:
        records.append(
            {
                "record": "proposal",
                "session_id": session_id,
                "id": proposal["id"],
                "idea_id": proposal["idea_id"],
                "status": proposal["status"],
                "sections": proposal["sections"],
            }
        )
        for versions in proposal["history"].values():
            for version in versions:
                records.append(
                    {
                        "record": "version",
                        "session_id": session_id,
                        "proposal_id": proposal["id"],
                        **version,
                    }
                )
    for i, report in enumerate(archive["reports"], start=1):
        records.append({"record": "report", "session_id": session_id, "index": i, **report})
    for step in archive["steps"]:
        records.append({"record": "step", **step})
    for event in archive["events"]:
        records.append({"record": "event", **event})
    return [json.dumps(record, sort_keys=True, ensure_ascii=False) for record in records]


def import_session(
    archive: dict[str, Any],
    versions: VersionStore,
    steps: StepLog,
    telemetry: TelemetryLog,
) -> Session:
    """Rebuild a session (and its histories, steps, and events) from an
    archive produced by :func:`export_session`."""
    if archive.get("format") != ARCHIVE_FORMAT:
        raise ValueError(f"unsupported archive format: {archive.get('format')!r}")
    body = archive["session"]
    ideas = [
        SeedIdea(
            id=item["id"],
            text=item["text"],
            source_keywords=list(item["source_keywords"]),
            abstract=item["abstract"],
            enhanced_query_ref=item["enhanced_query_ref"],
        )
        for item in archive["ideas"]
    ]
    ideas_by_id = {idea.id: idea for idea in ideas}
    criteria = [
        Criterion(
            id=item["id"],
            name=item["name"],
            description=item["description"],
            is_default=item["is_default"],
        )
        for item in archive["criteria"]
    ]
    session = Session(
        id=body["id"],
        level=ControlLevel(body["level"]),
        keywords=body["keywords"],
        created_at=_parse_ts(body["created_at"]),
        criteria=criteria,
        ideas=ideas,
        active_idea_id=body["active_idea_id"],
        original_idea_text=body["original_idea_text"],
        pinned_papers=list(body["pinned_papers"]),
        closed_at=_parse_ts(body["closed_at"]) if body["closed_at"] else None,
    )
    session.search_results = [
        PaperRecord(
            citation_id=item["citation_id"],
            title=item["title"],
            authors=list(item["authors"]),
            year=item["year"],
            abstract=item["abstract"],
            source=PaperSource(item["source"]),
            url=item["url"],
            venue=item["venue"],
            sections=[PaperSection(label, text) for label, text in item["sections"]],
        )
        for item in archive["search_results"]
    ]
    session.snippets = [Snippet(url=s["url"], text=s["text"]) for s in archive["snippets"]]

    for item in archive["proposals"]:
        proposal = Proposal(
            id=item["id"],
            idea=ideas_by_id[item["idea_id"]],
            status=ProposalStatus(item["status"]),
        )
        for kind in SectionKind:
            for version in item["history"].get(kind.slug, ()):
                versions.restore(
                    proposal.id,
                    kind,
                    seq=version["seq"],
                    content=version["content"],
                    citations=tuple(version["citations"]),
                    origin=Origin(version["origin"]),
                    parent_seq=version["parent_seq"],
                    created_at=_parse_ts(version["created_at"]),
                )
        proposal.sections = {
            SectionKind.from_slug(slug): seq for slug, seq in item["sections"].items()
        }
        session.proposals.append(proposal)
        for kind, seq in proposal.sections.items():
            session.memory.update(kind, seq)

    for item in archive["reports"]:
        report = EvaluationReport(
            proposal_version_fingerprint=item["fingerprint"],
            criteria=[
                Criterion(c["id"], c["name"], c["description"], c["is_default"])
                for c in item["criteria"]
            ],
            reflections={
                int(cid): [
                    Reflection(
                        criterion_id=r["criterion_id"],
                        text=r["text"],
                        vote=Vote(r["vote"]) if r["vote"] else None,
                    )
                    for r in rs
                ]
                for cid, rs in item["reflections"].items()
            },
            improvements=[
                Improvement(
                    criterion_id=i["criterion_id"],
                    criterion_name=i["criterion_name"],
                    suggestions=list(i["suggestions"]),
                    selected=i["selected"],
                    customized_text=i["customized_text"],
                )
                for i in item["improvements"]
            ],
        )
        session.reports.append(report)

    for item in archive["steps"]:
        steps.log(
            session_id=item["session_id"],
            role=Origin(item["role"]),
            operation=item["operation"],
            status=StepStatus(item["status"]),
            detail=item["detail"],
            started_at=_parse_ts(item["started_at"]),
            ended_at=_parse_ts(item["ended_at"]),
        )
    for item in archive["events"]:
        telemetry.record(
            session_id=item["session_id"],
            metric=Metric(item["metric"]),
            payload=item["payload"],
            timestamp=_parse_ts(item["timestamp"]),
        )
    return session
