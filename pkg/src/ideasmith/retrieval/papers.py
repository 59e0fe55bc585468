"""Citation-id minting and multi-source search merging."""

from __future__ import annotations

import re
from typing import Collection, Iterable, Protocol, Sequence

from ..model import is_citation_token
from ..provenance import emit_step
from ..model import Origin
from .base import PaperRecord

__all__ = [
    "SearchClient",
    "SourceUnavailable",
    "family_name",
    "make_citation_id",
    "merge_results",
    "search_academic",
    "title_key",
]

_TITLE_STOPWORDS = {
    "a", "an", "the", "of", "in", "on", "for", "and", "or", "to",
    "with", "at", "by", "from", "into", "via", "toward", "towards",
}

_ALNUM_RE = re.compile(r"[^A-Za-z0-9]+")

# The joined title fragment is capped at ten characters, which reproduces
# tokens like Smith2020TheoryArti ("Theory" + "Arti").
_TITLE_FRAGMENT_LEN = 10


class SourceUnavailable(Exception):
    def __init__(self, message: str, source: str | None = None):
        super().__init__(message)
        self.source = source


class SearchClient(Protocol):
    name: str

    def search(self, query: str, limit: int) -> list[PaperRecord]: ...


def family_name(author: str) -> str:
    """Best-effort family name: text before a comma, else the last word."""
    author = author.strip()
    if not author:
        return ""
    if "," in author:
        return author.split(",", 1)[0].strip()
    return author.split()[-1]


def _alnum(text: str) -> str:
    return _ALNUM_RE.sub("", text)


def title_key(title: str) -> str:
    """Dedup key: lowercased title stripped of punctuation and whitespace."""
    return _alnum(title).lower()


def make_citation_id(
    first_author: str,
    year: int,
    title: str,
    taken: Collection[str] = (),
) -> str:
    """Mint a citation token: FirstAuthorFamilyName + Year + the first two
    significant title words in TitleCase, capped at ten characters.

    Pure function of the metadata plus the collision history: a collision
    against ``taken`` gets a single-letter suffix (b, c, ...).
    """
    if not title.strip():
        raise ValueError("title must be non-empty")
    name = _alnum(family_name(first_author)) or "Anon"
    words = [
        _alnum(w).capitalize()
        for w in title.split()
        if _alnum(w) and _alnum(w).lower() not in _TITLE_STOPWORDS
    ]
    fragment = "".join(words[:2])[:_TITLE_FRAGMENT_LEN] or "Untitled"
    base = f"{name}{year}{fragment}"
    if not base[0].isalpha():
        base = "P" + base
    if not is_citation_token(base):
        base = "P" + _alnum(base)
    if base not in taken:
        return base
    for suffix in "bcdefghijklmnopqrstuvwxyz":
        candidate = base + suffix
        if candidate not in taken:
            return candidate
    n = 2
    while f"{base}x{n}" in taken:
        n += 1
    return f"{base}x{n}"


def merge_results(
    per_source: Sequence[list[PaperRecord]],
    limit: int,
    taken: Collection[str] = (),
    known_titles: dict[str, str] | None = None,
) -> list[PaperRecord]:
    """Interleave per-source result lists round-robin, dedup by normalized
    title, and assign citation ids (reusing ids for already-known titles)."""
    known_titles = known_titles if known_titles is not None else {}
    assigned: set[str] = set(taken) | set(known_titles.values())
    merged: list[PaperRecord] = []
    seen_keys: set[str] = set()
    queues = [list(results) for results in per_source]
    while any(queues) and len(merged) < limit:
        for queue in queues:
            if not queue or len(merged) >= limit:
                continue
            record = queue.pop(0)
            key = title_key(record.title)
            if not key or key in seen_keys:
                continue
            seen_keys.add(key)
            if key in known_titles:
                record.citation_id = known_titles[key]
            else:
                first_author = record.authors[0] if record.authors else ""
                record.citation_id = make_citation_id(first_author, record.year, record.title, assigned)
                assigned.add(record.citation_id)
                known_titles[key] = record.citation_id
            merged.append(record)
    return merged


def search_academic(
    query: str,
    limit: int,
    clients: Iterable[SearchClient],
    taken: Collection[str] = (),
    known_titles: dict[str, str] | None = None,
) -> list[PaperRecord]:
    """Query every academic source and merge the results.

    A failing source degrades to partial results; all sources failing raises
    :class:`SourceUnavailable`.
    """
    if limit < 1:
        raise ValueError("limit must be >= 1")
    clients = list(clients)
    if not clients:
        raise SourceUnavailable("no academic search clients configured")
    per_source: list[list[PaperRecord]] = []
    failures: list[str] = []
    for client in clients:
        try:
            results = client.search(query, limit)
        except Exception as exc:  # noqa: BLE001 - degrade per source
            failures.append(f"{client.name}: {exc}")
            emit_step(Origin.SYSTEM, f"search:{client.name}", ok=False, detail=str(exc))
            continue
        per_source.append(results)
        emit_step(Origin.SYSTEM, f"search:{client.name}", ok=True, detail=f"{len(results)} results")
    if not per_source:
        raise SourceUnavailable("; ".join(failures) or "all sources failed")
    return merge_results(per_source, limit, taken, known_titles)
