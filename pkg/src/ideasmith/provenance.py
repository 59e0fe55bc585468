"""Transparency backbone: per-section version history with safe revert, and
the append-only agent-step trace that records failures as well as successes.

Versions are never mutated or deleted; revert commits a new version whose
content is byte-identical to the target. Steps are emitted through a
context-bound sink so lower layers (gateway, retrieval) can log without
knowing which session they are serving.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Callable, Iterator

from .model import Origin, SectionKind, utcnow

__all__ = [
    "AgentStep",
    "StepLog",
    "StepStatus",
    "UnknownVersion",
    "VersionRecord",
    "VersionStore",
    "bind_step_sink",
    "emit_step",
]


class UnknownVersion(KeyError):
    pass


class StepStatus(str, Enum):
    SUCCESS = "success"
    FAILURE = "failure"


@dataclass(frozen=True)
class VersionRecord:
    section: SectionKind
    seq: int
    content: str
    citations: tuple[str, ...]
    origin: Origin
    parent_seq: int | None
    created_at: datetime


@dataclass(frozen=True)
class AgentStep:
    seq: int
    session_id: str
    role: Origin
    operation: str
    status: StepStatus
    detail: str
    started_at: datetime
    ended_at: datetime


class VersionStore:
    """Append-only version history keyed by (proposal, section)."""

    def __init__(self, clock: Callable[[], datetime] = utcnow):
        self._histories: dict[tuple[str, SectionKind], list[VersionRecord]] = {}
        self._lock = threading.Lock()
        self._clock = clock

    def commit(
        self,
        proposal_id: str,
        kind: SectionKind,
        content: str,
        citations: tuple[str, ...] | list[str],
        origin: Origin,
    ) -> VersionRecord:
        """Append a new version; it becomes the section's current version.
        Byte-identical recommits still get a new sequence number — history
        records the act, not just the content."""
        with self._lock:
            history = self._histories.setdefault((proposal_id, kind), [])
            parent = history[-1].seq if history else None
            record = VersionRecord(
                section=kind,
                seq=(history[-1].seq + 1) if history else 1,
                content=content,
                citations=tuple(citations),
                origin=origin,
                parent_seq=parent,
                created_at=self._clock(),
            )
            history.append(record)
            return record

    def restore(
        self,
        proposal_id: str,
        kind: SectionKind,
        *,
        seq: int,
        content: str,
        citations: tuple[str, ...],
        origin: Origin,
        parent_seq: int | None,
        created_at: datetime,
    ) -> VersionRecord:
        """Re-append an archived version verbatim (import path). Sequence
        numbers must arrive in append order."""
        with self._lock:
            history = self._histories.setdefault((proposal_id, kind), [])
            expected = (history[-1].seq + 1) if history else 1
            if seq != expected:
                raise ValueError(f"restore out of order: expected seq {expected}, got {seq}")
            record = VersionRecord(
                section=kind,
                seq=seq,
                content=content,
                citations=tuple(citations),
                origin=origin,
                parent_seq=parent_seq,
                created_at=created_at,
            )
            history.append(record)
            return record

    def revert(self, proposal_id: str, kind: SectionKind, target_seq: int) -> VersionRecord:
        """Revert-as-commit: a new version whose content is bit-identical to
        ``target_seq``, attributed to the human. History is never truncated."""
        target = self.get(proposal_id, kind, target_seq)
        return self.commit(proposal_id, kind, target.content, target.citations, Origin.HUMAN)

    def get(self, proposal_id: str, kind: SectionKind, seq: int) -> VersionRecord:
        with self._lock:
            for record in self._histories.get((proposal_id, kind), ()):
                if record.seq == seq:
                    return record
        raise UnknownVersion(f"{proposal_id}/{kind.slug} has no version {seq}")

    def current(self, proposal_id: str, kind: SectionKind) -> VersionRecord | None:
        with self._lock:
            history = self._histories.get((proposal_id, kind))
            return history[-1] if history else None

    def history(self, proposal_id: str, kind: SectionKind) -> list[VersionRecord]:
        """All versions in ascending sequence order."""
        with self._lock:
            return list(self._histories.get((proposal_id, kind), ()))

    def proposal_ids(self) -> list[str]:
        with self._lock:
            seen: dict[str, None] = {}
            for proposal_id, _ in self._histories:
                seen.setdefault(proposal_id, None)
            return list(seen)


class StepLog:
    """Append-only trace of agent operations, including failed attempts."""

    def __init__(self, clock: Callable[[], datetime] = utcnow):
        self._steps: dict[str, list[AgentStep]] = {}
        self._lock = threading.Lock()
        self._clock = clock

    def log(
        self,
        session_id: str,
        role: Origin,
        operation: str,
        status: StepStatus,
        detail: str = "",
        started_at: datetime | None = None,
        ended_at: datetime | None = None,
    ) -> AgentStep:
        now = self._clock()
        with self._lock:
            steps = self._steps.setdefault(session_id, [])
            step = AgentStep(
                seq=len(steps) + 1,
                session_id=session_id,
                role=role,
                operation=operation,
                status=status,
                detail=detail,
                started_at=started_at or now,
                ended_at=ended_at or now,
            )
            steps.append(step)
            return step

    def for_session(self, session_id: str) -> list[AgentStep]:
        with self._lock:
            return list(self._steps.get(session_id, ()))


# A sink receives (role, operation, ok, detail). Bound per session/operation
# scope; emissions outside any scope are dropped.
StepSink = Callable[[Origin, str, bool, str], None]

_current_sink: ContextVar[StepSink | None] = ContextVar("ideasmith_step_sink", default=None)


@contextmanager
def bind_step_sink(sink: StepSink) -> Iterator[None]:
    token = _current_sink.set(sink)
    try:
        yield
    finally:
        _current_sink.reset(token)


def emit_step(role: Origin, operation: str, ok: bool, detail: str = "") -> None:
    """Emit a fine-grained step (one per model/tool call) to the bound sink."""
    sink = _current_sink.get()
    if sink is not None:
        sink(role, operation, ok, detail)
