"""Citation wire-format parsing, validation, and repair.

The wire format is ``[CITATION: <token>]`` with one space after the colon.
The parser additionally accepts zero or multiple spaces and normalizes on
output. Parsing is total: malformed variants (numeric ``[1]``, combined
``[CITATION: a; CITATION: b]``, bracketed author-date) are classified and
returned as data, never raised.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import datetime

from .model import Origin, SectionDraft, SectionKind

__all__ = [
    "CitationMatch",
    "CitationScan",
    "RepairOutcome",
    "ValidationResult",
    "canonical_bracket",
    "count_research_questions",
    "draft_from_text",
    "enforce_context",
    "parse_citation_brackets",
    "strip_citations",
    "validate_section",
]

Span = tuple[int, int]

TOKEN = r"[A-Za-z][A-Za-z0-9]*"

# A full well-formed bracket; spacing after the colon is tolerated on input.
WELLFORMED_RE = re.compile(r"\[CITATION:\s*(" + TOKEN + r")\s*\]")

# Any bracket group without nested brackets; classification happens per group.
_BRACKET_RE = re.compile(r"\[[^\[\]]*\]")

_NUMERIC_RE = re.compile(r"\d+(?:\s*[,;–—-]\s*\d+)*\Z")
_AUTHOR_DATE_RE = re.compile(
    r"[A-Z][A-Za-z\-]+(?:\s+(?:et\s+al\.?|and\s+[A-Z][A-Za-z\-]+))?,?\s+\(?(?:19|20)\d{2}[a-z]?\)?\Z"
)
_MENTIONS_CITATION_RE = re.compile(r"citation", re.IGNORECASE)

# Tokens inside a malformed combined bracket, e.g. "CITATION: a; CITATION: b".
_EMBEDDED_TOKEN_RE = re.compile(r"CITATION:?\s*(" + TOKEN + r")")

_QUESTION_RUN_RE = re.compile(r"\?+")


@dataclass(frozen=True)
class CitationMatch:
    token: str
    span: Span


@dataclass(frozen=True)
class CitationScan:
    """Every citation-looking bracket in a text, in document order."""

    wellformed: tuple[CitationMatch, ...]
    malformed: tuple[Span, ...]

    @property
    def tokens(self) -> tuple[str, ...]:
        """Well-formed tokens in order of first appearance, deduplicated."""
        seen: dict[str, None] = {}
        for m in self.wellformed:
            seen.setdefault(m.token, None)
        return tuple(seen)

    @property
    def clean(self) -> bool:
        return not self.malformed


def canonical_bracket(token: str) -> str:
    return f"[CITATION: {token}]"


def _classify(segment: str) -> str:
    """Classify one bracket group: 'well', 'malformed', or 'other'."""
    if WELLFORMED_RE.fullmatch(segment):
        return "well"
    inner = segment[1:-1].strip()
    if _MENTIONS_CITATION_RE.search(segment):
        return "malformed"
    if _NUMERIC_RE.fullmatch(inner):
        return "malformed"
    if _AUTHOR_DATE_RE.fullmatch(inner):
        return "malformed"
    return "other"


def parse_citation_brackets(text: str) -> CitationScan:
    """Scan ``text`` for citation brackets.

    Returns every well-formed ``[CITATION: id]`` occurrence in order with its
    character span, and the spans of malformed citation-like brackets.
    Brackets that are clearly not citations (e.g. ``[sic]``) are ignored.
    Total function: malformations are data, not errors.
    """
    wellformed: list[CitationMatch] = []
    malformed: list[Span] = []
    for m in _BRACKET_RE.finditer(text):
        segment = m.group(0)
        kind = _classify(segment)
        if kind == "well":
            token = WELLFORMED_RE.fullmatch(segment).group(1)  # type: ignore[union-attr]
            wellformed.append(CitationMatch(token, (m.start(), m.end())))
        elif kind == "malformed":
            malformed.append((m.start(), m.end()))
    return CitationScan(tuple(wellformed), tuple(malformed))


def _rebuild(text: str, edits: list[tuple[Span, str | None]]) -> str:
    """Apply span edits to ``text``.

    ``None`` replacement removes the span together with adjacent whitespace,
    collapsing runs of removals to a single space (or nothing at the string
    edges). A string replacement substitutes the span in place. Edits must be
    sorted and non-overlapping.
    """
    out: list[str] = []
    cursor = 0
    n = len(text)
    emitted_any = False
    pending_gap = False  # a collapse-space owed before the next content

    def emit(piece: str) -> None:
        nonlocal emitted_any, pending_gap
        if not piece:
            return
        if pending_gap:
            out.append(" ")
            pending_gap = False
        out.append(piece)
        emitted_any = True

    for (start, end), replacement in edits:
        if replacement is not None:
            emit(text[cursor:start])
            emit(replacement)
            cursor = end
            continue
        left = start
        while left > cursor and text[left - 1].isspace():
            left -= 1
        right = end
        while right < n and text[right].isspace():
            right += 1
        emit(text[cursor:left])
        if emitted_any:
            pending_gap = True
        cursor = right
    emit(text[cursor:])
    return "".join(out)


def strip_citations(text: str) -> str:
    """Remove every well-formed and malformed citation bracket.

    Whitespace around each removed bracket collapses to a single space; at
    the start or end of the text it is dropped. No other characters change,
    and a text without citations is returned unchanged.
    """
    scan = parse_citation_brackets(text)
    spans = sorted([m.span for m in scan.wellformed] + list(scan.malformed))
    if not spans:
        return text
    return _rebuild(text, [(span, None) for span in spans])


@dataclass(frozen=True)
class RepairOutcome:
    """Result of forcing a text's citations into an allowed context."""

    text: str
    citations: tuple[str, ...]
    removed_invented: tuple[str, ...]
    repaired_malformed: int
    changed: bool


def enforce_context(text: str, allowed: set[str]) -> RepairOutcome:
    """Deterministically repair ``text`` so that it only carries well-formed
    citations whose ids are in ``allowed``.

    Well-formed brackets are normalized to canonical spacing; brackets citing
    unknown ids are removed; combined brackets are split into separate
    canonical brackets (dropping unknown ids); numeric and author-date
    brackets are removed.
    """
    scan = parse_citation_brackets(text)
    edits: list[tuple[Span, str | None]] = []
    removed: list[str] = []
    repaired = 0

    for m in scan.wellformed:
        if m.token in allowed:
            canonical = canonical_bracket(m.token)
            start, end = m.span
            if text[start:end] != canonical:
                edits.append((m.span, canonical))
        else:
            removed.append(m.token)
            edits.append((m.span, None))

    for span in scan.malformed:
        segment = text[span[0] : span[1]]
        embedded = _EMBEDDED_TOKEN_RE.findall(segment)
        kept = [t for t in embedded if t in allowed]
        removed.extend(t for t in embedded if t not in allowed)
        if kept:
            repaired += 1
            edits.append((span, ", ".join(canonical_bracket(t) for t in kept)))
        else:
            if embedded:
                repaired += 1
            edits.append((span, None))

    edits.sort(key=lambda e: e[0])
    new_text = _rebuild(text, edits) if edits else text
    final = parse_citation_brackets(new_text)
    # Dedupe while preserving order of first appearance.
    seen: dict[str, None] = {}
    for match in final.wellformed:
        seen.setdefault(match.token, None)
    dedup_removed: dict[str, None] = {}
    for token in removed:
        dedup_removed.setdefault(token, None)
    return RepairOutcome(
        text=new_text,
        citations=tuple(seen),
        removed_invented=tuple(dedup_removed),
        repaired_malformed=repaired,
        changed=bool(edits),
    )


def count_research_questions(text: str) -> int:
    """Heuristic research-question count: one per run of question marks.

    Counts sentences ending in "?" as well as enumerated items that end in
    "?" (both reduce to terminal question-mark runs). Advisory only, never
    blocking.
    """
    return len(_QUESTION_RUN_RE.findall(text))


@dataclass(frozen=True)
class ValidationResult:
    invented: tuple[str, ...]
    malformed_spans: tuple[Span, ...]
    research_question_count: int | None
    research_question_flag: bool

    @property
    def ok(self) -> bool:
        return not self.invented and not self.malformed_spans


def validate_section(draft: SectionDraft, context_ids: set[str]) -> ValidationResult:
    """Check a draft against its retrieval context.

    Reports citations not present in ``context_ids`` ("invented"), malformed
    bracket spans, and — for research goals — an advisory flag when the
    detected question count falls outside 2-3.
    """
    scan = parse_citation_brackets(draft.text)
    cited: dict[str, None] = {}
    for m in scan.wellformed:
        cited.setdefault(m.token, None)
    for token in draft.citations:
        cited.setdefault(token, None)
    invented = tuple(t for t in cited if t not in context_ids)

    count: int | None = None
    flag = False
    if draft.kind is SectionKind.RESEARCH_GOALS:
        count = count_research_questions(draft.text)
        flag = count not in (2, 3)

    return ValidationResult(
        invented=invented,
        malformed_spans=scan.malformed,
        research_question_count=count,
        research_question_flag=flag,
    )


def draft_from_text(
    kind: SectionKind,
    text: str,
    origin: Origin,
    created_at: datetime | None = None,
) -> SectionDraft:
    """Build a SectionDraft whose citation set is derived from the text, so
    the listed-citations-appear-in-text invariant holds by construction."""
    tokens = parse_citation_brackets(text).tokens
    if created_at is None:
        return SectionDraft(kind=kind, text=text, citations=tokens, origin=origin)
    return SectionDraft(kind=kind, text=text, citations=tokens, origin=origin, created_at=created_at)
