"""HTTP clients for the academic search APIs and open-web snippet search.

These return plain records; citation ids are assigned at merge time. Tests
exercise them against fixture transports — no client here is required for
the offline test suite.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from urllib.parse import quote

import httpx

from .base import PaperRecord, PaperSource, Snippet
from .papers import SourceUnavailable

__all__ = ["ArxivClient", "DuckDuckGoClient", "SemanticScholarClient", "WebSearchClient"]

_S2_FIELDS = "title,abstract,year,authors,venue,url,externalIds"
_ATOM_NS = {"atom": "http://www.w3.org/2005/Atom"}


class SemanticScholarClient:
    name = "semantic_scholar"

    def __init__(
        self,
        base_url: str = "https://api.semanticscholar.org",
        api_key: str | None = None,
        http: httpx.Client | None = None,
        timeout: float = 30.0,
    ):
        headers = {"x-api-key": api_key} if api_key else {}
        self._base = base_url.rstrip("/")
        self._http = http or httpx.Client(timeout=timeout, headers=headers)

    def search(self, query: str, limit: int) -> list[PaperRecord]:
        try:
            response = self._http.get(
                f"{self._base}/graph/v1/paper/search",
                params={"query": query, "limit": limit, "fields": _S2_FIELDS},
            )
            response.raise_for_status()
            payload = response.json()
        except httpx.HTTPError as exc:
            raise SourceUnavailable(str(exc), source=self.name) from exc
        records: list[PaperRecord] = []
        for item in payload.get("data", []):
            title = (item.get("title") or "").strip()
            if not title:
                continue
            records.append(
                PaperRecord(
                    citation_id="",
                    title=title,
                    authors=[a.get("name", "") for a in item.get("authors", [])],
                    year=item.get("year") or 0,
                    abstract=item.get("abstract") or "",
                    source=PaperSource.SEMANTIC_SCHOLAR,
                    url=item.get("url") or "",
                    venue=item.get("venue") or None,
                )
            )
        return records


class ArxivClient:
    name = "arxiv"

    def __init__(
        self,
        base_url: str = "http://export.arxiv.org",
        http: httpx.Client | None = None,
        timeout: float = 30.0,
    ):
        self._base = base_url.rstrip("/")
        self._http = http or httpx.Client(timeout=timeout)

    def search(self, query: str, limit: int) -> list[PaperRecord]:
        try:
            response = self._http.get(
                f"{self._base}/api/query",
                params={"search_query": f"all:{query}", "max_results": limit},
            )
            response.raise_for_status()
            root = ET.fromstring(response.text)
        except (httpx.HTTPError, ET.ParseError) as exc:
            raise SourceUnavailable(str(exc), source=self.name) from exc
        records: list[PaperRecord] = []
        for entry in root.findall("atom:entry", _ATOM_NS):
            title = " ".join((entry.findtext("atom:title", "", _ATOM_NS) or "").split())
            if not title:
                continue
            published = entry.findtext("atom:published", "", _ATOM_NS) or ""
            year = int(published[:4]) if published[:4].isdigit() else 0
            records.append(
                PaperRecord(
                    citation_id="",
                    title=title,
                    authors=[
                        (author.findtext("atom:name", "", _ATOM_NS) or "").strip()
                        for author in entry.findall("atom:author", _ATOM_NS)
                    ],
                    year=year,
                    abstract=" ".join((entry.findtext("atom:summary", "", _ATOM_NS) or "").split()),
                    source=PaperSource.ARXIV,
                    url=entry.findtext("atom:id", "", _ATOM_NS) or "",
                )
            )
        return records


class WebSearchClient:
    """Protocol-shaped base for snippet providers."""

    name = "web"

    def search(self, query: str, n: int) -> list[Snippet]:  # pragma: no cover - interface
        raise NotImplementedError


class DuckDuckGoClient(WebSearchClient):
    """Snippets from the DuckDuckGo Instant Answer API (JSON)."""

    name = "duckduckgo"

    def __init__(
        self,
        base_url: str = "https://api.duckduckgo.com",
        http: httpx.Client | None = None,
        timeout: float = 20.0,
    ):
        self._base = base_url.rstrip("/")
        self._http = http or httpx.Client(timeout=timeout)

    def search(self, query: str, n: int) -> list[Snippet]:
        response = self._http.get(
            f"{self._base}/?q={quote(query)}&format=json&no_html=1&skip_disambig=1"
        )
        response.raise_for_status()
        payload = response.json()
        snippets: list[Snippet] = []
        abstract = (payload.get("AbstractText") or "").strip()
        if abstract:
            snippets.append(Snippet(url=payload.get("AbstractURL") or "", text=abstract))
        for topic in payload.get("RelatedTopics", []):
            text = (topic.get("Text") or "").strip()
            if text:
                snippets.append(Snippet(url=topic.get("FirstURL") or "", text=text))
            if len(snippets) >= n:
                break
        return snippets[:n]
