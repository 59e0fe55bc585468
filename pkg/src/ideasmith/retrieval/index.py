"""Embedding index over paper chunks — the system's long-term memory.

Scoring is plain cosine similarity; chunks whose section label maps to the
target proposal section get a fixed additive boost before top-k selection.
Scores are computed per chunk with the same IEEE operations an independent
full-scan would use, so exact-match oracle testing is possible.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

from ..model import SectionKind
from .base import Chunk, RetrievalConfig, ScoredChunk

__all__ = [
    "Embedder",
    "EmbeddingError",
    "EmptyIndex",
    "HashingEmbedder",
    "IndexStats",
    "VectorIndex",
    "cosine",
]


class EmbeddingError(Exception):
    pass


class EmptyIndex(Exception):
    pass


class Embedder(Protocol):
    dimension: int

    def embed_one(self, text: str) -> np.ndarray: ...


class HashingEmbedder:
    """Deterministic local embedder: hashed unigram+bigram bag of words,
    L2-normalized. No network, no model weights; good enough to exercise the
    full retrieval stack and to serve as the offline default."""

    def __init__(self, dimension: int = 256):
        if dimension < 8:
            raise ValueError("dimension too small")
        self.dimension = dimension

    def _features(self, text: str) -> Iterable[str]:
        tokens = [t for t in text.lower().split() if t]
        yield from tokens
        for a, b in zip(tokens, tokens[1:]):
            yield f"{a} {b}"

    def embed_one(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=np.float64)
        for feature in self._features(text):
            digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8).digest()
            value = int.from_bytes(digest, "big")
            index = value % self.dimension
            sign = 1.0 if (value >> 63) & 1 else -1.0
            vec[index] += sign
        norm = float(np.linalg.norm(vec))
        if norm > 0:
            vec /= norm
        return vec


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Zero-safe cosine similarity, clamped to [-1, 1]."""
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    value = float(np.dot(a, b)) / (na * nb)
    return max(-1.0, min(1.0, value))


@dataclass
class IndexStats:
    added: int = 0
    skipped: int = 0
    errors: list[tuple[str, str]] = field(default_factory=list)


class VectorIndex:
    """Persistent chunk index with concurrent readers and batch ingestion.

    Embeddings are L2-normalized at ingest time and stored with the chunk;
    the index rejects vectors whose dimension disagrees with its
    configuration. Persistence is one JSON record per chunk, appended to a
    file the index owns.
    """

    def __init__(
        self,
        embedder: Embedder,
        config: RetrievalConfig | None = None,
        path: Path | str | None = None,
    ):
        self.config = config or RetrievalConfig()
        if embedder.dimension != self.config.embedding_dimension:
            raise ValueError(
                f"embedder dimension {embedder.dimension} does not match configured "
                f"{self.config.embedding_dimension}"
            )
        self._embedder = embedder
        self._chunks: dict[str, Chunk] = {}
        self._lock = threading.RLock()
        self._path = Path(path) if path is not None else None
        if self._path is not None and self._path.exists():
            self._load()

    def __len__(self) -> int:
        with self._lock:
            return len(self._chunks)

    def paper_ids(self) -> set[str]:
        with self._lock:
            return {c.paper for c in self._chunks.values()}

    def chunks(self) -> list[Chunk]:
        with self._lock:
            return list(self._chunks.values())

    def _load(self) -> None:
        for line in self._path.read_text(encoding="utf-8").splitlines():  # type: ignore[union-attr]
            if not line.strip():
                continue
            record = json.loads(line)
            chunk = Chunk(
                chunk_id=record["chunk_id"],
                paper=record["paper"],
                section_label=record["section_label"],
                text=record["text"],
                embedding=tuple(record["embedding"]),
            )
            self._chunks[chunk.chunk_id] = chunk

    def _persist(self, chunk: Chunk) -> None:
        if self._path is None:
            return
        record = {
            "chunk_id": chunk.chunk_id,
            "paper": chunk.paper,
            "section_label": chunk.section_label,
            "text": chunk.text,
            "embedding": list(chunk.embedding or ()),
        }
        self._path.parent.mkdir(parents=True, exist_ok=True)
        with self._path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(record) + "\n")

    def _normalized(self, vector: Sequence[float] | np.ndarray) -> np.ndarray:
        vec = np.asarray(vector, dtype=np.float64)
        if vec.shape != (self.config.embedding_dimension,):
            raise EmbeddingError(
                f"vector of shape {vec.shape} does not match index dimension "
                f"{self.config.embedding_dimension}"
            )
        norm = float(np.linalg.norm(vec))
        return vec / norm if norm > 0 else vec

    def add(self, chunks: Iterable[Chunk]) -> IndexStats:
        """Embed and persist chunks. Idempotent by chunk id; an embedding
        failure skips that chunk and is reported, not raised."""
        stats = IndexStats()
        with self._lock:
            for chunk in chunks:
                if chunk.chunk_id in self._chunks:
                    stats.skipped += 1
                    continue
                if len(chunk.text) > self.config.max_chunk_chars:
                    stats.errors.append((chunk.chunk_id, "chunk exceeds max_chunk_chars"))
                    continue
                try:
                    if chunk.embedding is not None:
                        vec = self._normalized(chunk.embedding)
                    else:
                        vec = self._normalized(self._embedder.embed_one(chunk.text))
                except Exception as exc:  # noqa: BLE001 - per-chunk tolerance
                    stats.errors.append((chunk.chunk_id, str(exc)))
                    continue
                stored = Chunk(
                    chunk_id=chunk.chunk_id,
                    paper=chunk.paper,
                    section_label=chunk.section_label,
                    text=chunk.text,
                    embedding=tuple(float(x) for x in vec),
                )
                self._chunks[stored.chunk_id] = stored
                self._persist(stored)
                stats.added += 1
        return stats

    def embed_text(self, text: str) -> np.ndarray:
        return self._normalized(self._embedder.embed_one(text))

    def retrieve(
        self,
        query_embedding: Sequence[float] | np.ndarray,
        target: SectionKind | None,
        *,
        k: int | None = None,
        pinned: Sequence[str] = (),
    ) -> list[ScoredChunk]:
        """Rank every chunk by cosine against the query and return the top-k
        by boosted score.

        Ordering: boosted score descending; at equal boosted score chunks
        from pinned papers come first, then base score descending, then
        chunk id ascending. Each pinned paper's best chunk is guaranteed
        inclusion (k permitting) regardless of score, and no paper
        contributes more than ``max_chunks_per_paper`` chunks.
        """
        k = self.config.k if k is None else k
        if k <= 0:
            raise ValueError("k must be positive")
        pinned_set = set(pinned)
        with self._lock:
            stored = list(self._chunks.values())
        if not stored:
            if pinned_set:
                return []
            raise EmptyIndex("no chunks indexed and nothing pinned")

        query = np.asarray(query_embedding, dtype=np.float64)
        if query.shape != (self.config.embedding_dimension,):
            raise EmbeddingError(
                f"query of shape {query.shape} does not match index dimension "
                f"{self.config.embedding_dimension}"
            )
        boost_labels = self.config.section_map[target] if target is not None else frozenset()
        boost = self.config.priority_boost

        scored: list[ScoredChunk] = []
        for chunk in stored:
            emb = np.asarray(chunk.embedding, dtype=np.float64)
            base = cosine(emb, query)
            boosted = base + boost if chunk.section_label in boost_labels else base
            scored.append(ScoredChunk(chunk=chunk, base_score=base, boosted_score=boosted))

        def order_key(sc: ScoredChunk) -> tuple:
            return (
                -sc.boosted_score,
                sc.chunk.paper not in pinned_set,
                -sc.base_score,
                sc.chunk.chunk_id,
            )

        scored.sort(key=order_key)

        # Selection pass 1: guarantee each pinned paper's best chunk a slot.
        result: list[ScoredChunk] = []
        per_paper: dict[str, int] = {}
        chosen: set[str] = set()
        if pinned_set:
            seen_pinned: set[str] = set()
            for sc in scored:
                if len(result) >= k:
                    break
                paper = sc.chunk.paper
                if paper in pinned_set and paper not in seen_pinned:
                    result.append(sc)
                    chosen.add(sc.chunk.chunk_id)
                    per_paper[paper] = per_paper.get(paper, 0) + 1
                    seen_pinned.add(paper)
        # Selection pass 2: fill remaining slots in score order, capped per paper.
        for sc in scored:
            if len(result) >= k:
                break
            if sc.chunk.chunk_id in chosen:
                continue
            paper = sc.chunk.paper
            if per_paper.get(paper, 0) >= self.config.max_chunks_per_paper:
                continue
            result.append(sc)
            chosen.add(sc.chunk.chunk_id)
            per_paper[paper] = per_paper.get(paper, 0) + 1
        # Final ordering is score-based; pinning guarantees inclusion and wins
        # ties, it does not promote low scores above higher ones.
        result.sort(key=order_key)
        return result
