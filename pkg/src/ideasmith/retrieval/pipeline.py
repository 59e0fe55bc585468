"""The enhanced retrieval pipeline: rewrite the query, gather web snippets,
search the academic sources, chunk and index the results, and answer
section-targeted dense retrievals from the shared index.

Dense retrieval for drafting is zero-shot: a hypothetical abstract generated
from the selected seed idea is embedded once, saved as the idea's enhanced
query, and reused for every subsequent retrieval for that idea.
"""

from __future__ import annotations

import threading
from typing import Sequence

from ..gateway import LLMGateway
from ..model import Origin, SectionKind, SeedIdea
from ..prompts import TemplateId, render
from ..provenance import emit_step
from .base import EnhancedQuery, PaperRecord, RetrievalConfig, ScoredChunk, Snippet
from .chunking import chunk_paper
from .index import IndexStats, VectorIndex
from .papers import SearchClient, search_academic, title_key
from .sources import WebSearchClient

__all__ = ["RetrievalPipeline"]


class RetrievalPipeline:
    def __init__(
        self,
        gateway: LLMGateway,
        index: VectorIndex,
        search_clients: Sequence[SearchClient] = (),
        web_client: WebSearchClient | None = None,
        config: RetrievalConfig | None = None,
    ):
        self.gateway = gateway
        self.index = index
        self.search_clients = list(search_clients)
        self.web_client = web_client
        self.config = config or index.config
        self._enhanced: dict[str, EnhancedQuery] = {}
        self._known_titles: dict[str, str] = {}
        self._lock = threading.Lock()

    # -- query side ---------------------------------------------------------

    def rewrite_query(self, topic: str, role: Origin = Origin.IDEATOR) -> str:
        """Expand user keywords into an academic search query via the LLM."""
        if not topic.strip():
            raise ValueError("topic must be non-empty")
        prompt = render(TemplateId.QUERY_REWRITE, topic=topic)
        completion = self.gateway.complete(role, prompt)
        rewritten = completion.text.strip().splitlines()
        return rewritten[0].strip() if rewritten else topic

    def hypothetical_abstract(self, idea: SeedIdea) -> EnhancedQuery:
        """Generate (or reuse) the idea's enhanced query.

        The abstract is produced by the writer-role model, embedded, stored
        against the idea id, and attached to the idea itself.
        """
        if not idea.text.strip():
            raise ValueError("idea text must be non-empty")
        with self._lock:
            cached = self._enhanced.get(idea.id)
        if cached is not None:
            idea.abstract = cached.hypothetical_abstract
            idea.enhanced_query_ref = idea.id
            return cached
        prompt = render(TemplateId.HYPOTHETICAL_ABSTRACT, idea=idea.text)
        completion = self.gateway.complete(Origin.WRITER, prompt)
        abstract = completion.text.strip()
        embedding = tuple(float(x) for x in self.index.embed_text(abstract))
        enhanced = EnhancedQuery(
            seed_idea_id=idea.id,
            hypothetical_abstract=abstract,
            embedding=embedding,
        )
        with self._lock:
            self._enhanced[idea.id] = enhanced
        idea.abstract = abstract
        idea.enhanced_query_ref = idea.id
        return enhanced

    def enhanced_query_for(self, idea_id: str) -> EnhancedQuery | None:
        with self._lock:
            return self._enhanced.get(idea_id)

    def invalidate_enhanced(self, idea_id: str) -> None:
        with self._lock:
            self._enhanced.pop(idea_id, None)

    # -- corpus side --------------------------------------------------------

    def search_academic(self, query: str, limit: int | None = None) -> list[PaperRecord]:
        """Merged, deduplicated results from all configured sources. Papers
        already known to the pipeline keep their citation ids."""
        limit = limit or self.config.search_limit
        with self._lock:
            known = dict(self._known_titles)
        results = search_academic(
            query,
            limit,
            self.search_clients,
            taken=self.index.paper_ids(),
            known_titles=known,
        )
        with self._lock:
            self._known_titles.update(known)
        return results

    def ingest(self, papers: Sequence[PaperRecord]) -> IndexStats:
        """Chunk and index papers into long-term memory."""
        stats = IndexStats()
        for paper in papers:
            with self._lock:
                self._known_titles.setdefault(title_key(paper.title), paper.citation_id)
            batch = self.index.add(chunk_paper(paper, self.config))
            stats.added += batch.added
            stats.skipped += batch.skipped
            stats.errors.extend(batch.errors)
        emit_step(
            Origin.SYSTEM,
            "index:ingest",
            ok=not stats.errors,
            detail=f"added={stats.added} skipped={stats.skipped} errors={len(stats.errors)}",
        )
        return stats

    def web_snippets(self, query: str, n: int | None = None) -> list[Snippet]:
        """Up to ``n`` open-web snippets, truncated to the configured length.
        Failures degrade to an empty list; snippets are optional context."""
        n = self.config.snippet_count if n is None else n
        if n < 0:
            raise ValueError("n must be >= 0")
        if n == 0 or self.web_client is None:
            return []
        try:
            raw = self.web_client.search(query, n)
        except Exception as exc:  # noqa: BLE001 - snippets are best-effort
            emit_step(Origin.SYSTEM, "search:web", ok=False, detail=str(exc))
            return []
        limit = self.config.snippet_max_chars
        snippets = [Snippet(url=s.url, text=s.text[:limit]) for s in raw[:n]]
        emit_step(Origin.SYSTEM, "search:web", ok=True, detail=f"{len(snippets)} snippets")
        return snippets

    # -- retrieval ----------------------------------------------------------

    def retrieve_for(
        self,
        query: EnhancedQuery | str,
        target: SectionKind | None,
        pinned: Sequence[str] = (),
        k: int | None = None,
    ) -> list[ScoredChunk]:
        """Top-k chunks for a query with the target section's priority boost.
        Accepts an enhanced query (reusing its stored embedding) or a raw
        query string (embedded on the fly)."""
        if isinstance(query, EnhancedQuery):
            embedding = query.embedding
        else:
            embedding = self.index.embed_text(query)
        return self.index.retrieve(embedding, target, k=k, pinned=pinned)
