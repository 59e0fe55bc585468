"""Retrieval substrate: academic search, chunking, the embedding index, and
the rewrite/retrieve pipeline shared by all agent roles."""

from .base import (
    CANONICAL_SECTION_LABELS,
    Chunk,
    EnhancedQuery,
    PaperRecord,
    PaperSection,
    PaperSource,
    RetrievalConfig,
    ScoredChunk,
    Snippet,
)
from .chunking import chunk_paper, normalize_section_label, split_preserving
from .index import (
    Embedder,
    EmbeddingError,
    EmptyIndex,
    HashingEmbedder,
    IndexStats,
    VectorIndex,
    cosine,
)
from .papers import (
    SearchClient,
    SourceUnavailable,
    family_name,
    make_citation_id,
    merge_results,
    search_academic,
    title_key,
)
from .pipeline import RetrievalPipeline
from .sources import ArxivClient, DuckDuckGoClient, SemanticScholarClient, WebSearchClient

__all__ = [
    "ArxivClient",
    "CANONICAL_SECTION_LABELS",
    "Chunk",
    "DuckDuckGoClient",
    "Embedder",
    "EmbeddingError",
    "EmptyIndex",
    "EnhancedQuery",
    "HashingEmbedder",
    "IndexStats",
    "PaperRecord",
    "PaperSection",
    "PaperSource",
    "RetrievalConfig",
    "RetrievalPipeline",
    "ScoredChunk",
    "SearchClient",
    "SemanticScholarClient",
    "Snippet",
    "SourceUnavailable",
    "VectorIndex",
    "WebSearchClient",
    "chunk_paper",
    "cosine",
    "family_name",
    "make_citation_id",
    "merge_results",
    "normalize_section_label",
    "search_academic",
    "split_preserving",
    "title_key",
]
