"""Context-aware chunking: split papers along their native section structure.

Splitting preserves text exactly — concatenating a section's chunks in order
reproduces the section text byte for byte — and no chunk exceeds the
configured size.
"""

from __future__ import annotations

import re

from .base import Chunk, PaperRecord, RetrievalConfig

__all__ = ["chunk_paper", "normalize_section_label", "split_preserving"]

_LABEL_RULES: tuple[tuple[str, str], ...] = (
    (r"related\s*work|background|prior\s*work|literature", "related_work"),
    (r"intro", "introduction"),
    (r"method|approach|design|materials|procedure|experiment", "methods"),
    (r"result|finding|evaluation|analysis", "results"),
    (r"discussion|conclusion|limitation|future\s*work", "discussion"),
)

_PARAGRAPH_SPLIT_RE = re.compile(r"(\n{2,})")


def normalize_section_label(raw: str) -> str:
    """Map a raw section heading onto one of the canonical labels."""
    heading = raw.strip().lower()
    for pattern, label in _LABEL_RULES:
        if re.search(pattern, heading):
            return label
    return "other"


def split_preserving(text: str, max_chars: int) -> list[str]:
    """Split ``text`` into pieces of at most ``max_chars`` characters at
    paragraph boundaries, keeping separators so that ``"".join(pieces)``
    reproduces the input exactly. Oversized single paragraphs fall back to
    hard character windows."""
    if max_chars <= 0:
        raise ValueError("max_chars must be positive")
    if len(text) <= max_chars:
        return [text] if text else []

    parts = _PARAGRAPH_SPLIT_RE.split(text)
    paragraphs: list[str] = []
    for i in range(0, len(parts), 2):
        piece = parts[i] + (parts[i + 1] if i + 1 < len(parts) else "")
        if piece:
            paragraphs.append(piece)

    pieces: list[str] = []
    buffer = ""
    for paragraph in paragraphs:
        while len(paragraph) > max_chars:
            if buffer:
                pieces.append(buffer)
                buffer = ""
            pieces.append(paragraph[:max_chars])
            paragraph = paragraph[max_chars:]
        if len(buffer) + len(paragraph) <= max_chars:
            buffer += paragraph
        else:
            if buffer:
                pieces.append(buffer)
            buffer = paragraph
    if buffer:
        pieces.append(buffer)
    return pieces


def chunk_paper(paper: PaperRecord, cfg: RetrievalConfig) -> list[Chunk]:
    """Segment a paper into section-labeled chunks.

    The abstract is always emitted as an "other" chunk (split only if it
    exceeds the size limit); each section yields one or more chunks under its
    normalized label; papers with no section structure end up abstract-only.
    """
    chunks: list[Chunk] = []

    def push(label: str, text: str) -> None:
        chunks.append(
            Chunk(
                chunk_id=f"{paper.citation_id}#{len(chunks):03d}",
                paper=paper.citation_id,
                section_label=label,
                text=text,
            )
        )

    if paper.abstract.strip():
        for piece in split_preserving(paper.abstract, cfg.max_chunk_chars):
            push("other", piece)
    for section in paper.sections:
        label = normalize_section_label(section.label)
        for piece in split_preserving(section.text, cfg.max_chunk_chars):
            push(label, piece)
    return chunks
