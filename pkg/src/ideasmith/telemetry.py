"""Behavioral telemetry: one event per use of a counted feature, and
per-hour rate reports normalized over the active session duration."""

from __future__ import annotations

import threading
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Callable, Sequence

from .model import utcnow

__all__ = ["EventRecord", "Metric", "MetricsReport", "NoEvents", "TelemetryLog", "metrics_report"]


class Metric(str, Enum):
    """The counted behavioral metrics. The enumeration is exactly this set."""

    UNIQUE_RESEARCH_PROPOSALS = "unique_research_proposals"
    GENERATE_SEED_IDEAS = "generate_seed_ideas"
    PROMPT_FULL_PROPOSAL = "prompt_full_proposal"
    REVISE_FULL_PROPOSAL = "revise_full_proposal"
    SELECT_IMPROVEMENTS = "select_improvements"
    QUERY_SEARCHES = "query_searches"
    SELECT_PAPERS = "select_papers"
    PROMPT_PROPOSAL_SECTION = "prompt_proposal_section"
    INLINE_TEXT_PROMPTING = "inline_text_prompting"
    SAVE_EDITS = "save_edits"
    PROVIDE_FEEDBACK = "provide_feedback"
    REQUEST_MORE_CRITIQUES = "request_more_critiques"
    CUSTOMIZE_IMPROVEMENTS = "customize_improvements"


class NoEvents(Exception):
    pass


@dataclass(frozen=True)
class EventRecord:
    timestamp: datetime
    session_id: str
    metric: Metric
    payload: str | None = None


class TelemetryLog:
    """Append-only per-session event log."""

    def __init__(self, clock: Callable[[], datetime] = utcnow):
        self._events: dict[str, list[EventRecord]] = {}
        self._lock = threading.Lock()
        self._clock = clock

    def record(
        self,
        session_id: str,
        metric: Metric,
        payload: str | None = None,
        timestamp: datetime | None = None,
    ) -> EventRecord:
        event = EventRecord(
            timestamp=timestamp or self._clock(),
            session_id=session_id,
            metric=metric,
            payload=payload,
        )
        with self._lock:
            self._events.setdefault(session_id, []).append(event)
        return event

    def events(self, session_id: str) -> list[EventRecord]:
        with self._lock:
            return list(self._events.get(session_id, ()))


@dataclass(frozen=True)
class MetricsReport:
    """Raw counts and per-hour rates (raw x 3600 / duration) for one session.

    ``duration_basis`` records which clock produced the denominator: an
    explicit session close, the first-to-last event span, or — when a single
    event leaves a zero span — the span up to ``now``.
    """

    session_id: str
    duration_seconds: float
    duration_basis: str
    counts: dict[str, int]
    rates: dict[str, float]


def metrics_report(
    events: Sequence[EventRecord],
    *,
    session_id: str,
    created_at: datetime,
    closed_at: datetime | None,
    now: datetime,
) -> MetricsReport:
    """Compute the per-session metrics report.

    Raw counts are event multiset cardinalities; every metric appears in the
    report, zero-count ones included. Requires at least one event and a
    positive duration.
    """
    if not events:
        raise NoEvents(f"session {session_id} has no telemetry events")
    if now < created_at:
        raise ValueError("now precedes session creation")

    first = min(e.timestamp for e in events)
    last = max(e.timestamp for e in events)
    if closed_at is not None and (closed_at - first).total_seconds() > 0:
        duration = (closed_at - first).total_seconds()
        basis = "closed"
    elif (last - first).total_seconds() > 0:
        duration = (last - first).total_seconds()
        basis = "event-span"
    else:
        duration = (now - first).total_seconds()
        basis = "now-span"
    if duration <= 0:
        raise ValueError("session duration must be positive for rate normalization")

    counts = {metric.value: 0 for metric in Metric}
    for event in events:
        counts[event.metric.value] += 1
    rates = {name: count * 3600.0 / duration for name, count in counts.items()}
    return MetricsReport(
        session_id=session_id,
        duration_seconds=duration,
        duration_basis=basis,
        counts=counts,
        rates=rates,
    )
