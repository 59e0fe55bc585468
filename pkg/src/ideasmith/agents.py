"""The three agent roles as typed operations over the gateway and retrieval.

Ideator generates and refines seed ideas; Writer drafts the three proposal
sections in chain-of-thought order, revises them (including span-scoped
inline edits), and fact-checks citations; Evaluator produces per-criterion
critiques, extra reflections, improvement suggestions, and new criteria.

Every draft that leaves the Writer has passed citation verification: its
citations are a subset of the retrieval context and its brackets are
well-formed. Verification is scan -> one corrective model rewrite -> rescan,
with deterministic stripping as the terminal fallback.
"""

from __future__ import annotations

import re
import uuid
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Sequence

from . import citations
from .gateway import LLMGateway
from .model import (
    Criterion,
    EvaluationReport,
    Improvement,
    Origin,
    Reflection,
    SectionDraft,
    SectionKind,
    SeedIdea,
    Vote,
)
from .prompts import RenderedPrompt, TemplateId, render
from .provenance import emit_step
from .retrieval import ScoredChunk, Snippet

__all__ = [
    "ContextBundle",
    "DuplicateCriterion",
    "Evaluator",
    "FactCheckFailure",
    "Ideator",
    "OutputShapeError",
    "RevisionOutcome",
    "Writer",
    "ngram_overlap",
]

_LIST_MARKER_RE = re.compile(r"^\s*(?:[-*•]|\d+[.)]|[a-z][.)])\s+", re.IGNORECASE)
_WORD_RE = re.compile(r"[a-z0-9]+")

# Above this fraction of repeated 8-grams the study plan is flagged (advisory)
# for repeating the literature or research questions verbatim.
PLAN_OVERLAP_THRESHOLD = 0.30


class OutputShapeError(Exception):
    """The model returned a different number of items than requested."""


class FactCheckFailure(Exception):
    """Invented citations survived both the corrective rewrite and stripping.

    Stripping is deterministic, so this is defensive; it should not occur.
    """


class DuplicateCriterion(Exception):
    pass


@dataclass(frozen=True)
class ContextBundle:
    """The retrieval context handed to a prompt: scored chunks plus optional
    web snippets. Snippets enrich the prompt but contribute no citable ids."""

    chunks: tuple[ScoredChunk, ...] = ()
    snippets: tuple[Snippet, ...] = ()

    @property
    def context_ids(self) -> set[str]:
        return {sc.chunk.paper for sc in self.chunks}

    @property
    def empty(self) -> bool:
        return not self.chunks

    def render_context(self) -> str:
        if not self.chunks:
            return "(no retrieved context)"
        blocks = [
            f"[CITATION: {sc.chunk.paper}] ({sc.chunk.section_label})\n{sc.chunk.text}"
            for sc in self.chunks
        ]
        return "\n\n".join(blocks)

    def render_snippets(self) -> str:
        if not self.snippets:
            return "(none)"
        return "\n".join(f"- {s.text} ({s.url})" for s in self.snippets)


def _new_id() -> str:
    return uuid.uuid4().hex[:12]


def _sanitize_idea_line(line: str) -> str:
    """Normalize one model-produced idea line: drop list markers, citations,
    and terminal punctuation so the SeedIdea invariants hold."""
    line = _LIST_MARKER_RE.sub("", line.strip())
    stripped = citations.strip_citations(line)
    if stripped != line:
        emit_step(Origin.IDEATOR, "idea:strip_citations", ok=True, detail=line)
        line = stripped
    return line.strip().rstrip(".!?;:,").strip()


def ngram_overlap(text: str, reference: str, n: int = 8) -> float:
    """Fraction of ``text``'s word n-grams that also occur in ``reference``."""
    words = _WORD_RE.findall(text.lower())
    ref_words = _WORD_RE.findall(reference.lower())
    if len(words) < n or len(ref_words) < n:
        return 0.0
    grams = [tuple(words[i : i + n]) for i in range(len(words) - n + 1)]
    ref_grams = {tuple(ref_words[i : i + n]) for i in range(len(ref_words) - n + 1)}
    hits = sum(1 for g in grams if g in ref_grams)
    return hits / len(grams)


def _normalize_ws(text: str) -> str:
    return " ".join(text.split())


@dataclass(frozen=True)
class RevisionOutcome:
    draft: SectionDraft
    span_overreach: bool = False


class Ideator:
    """Generates seed ideas from keywords and refines them from feedback."""

    def __init__(self, gateway: LLMGateway, id_factory: Callable[[], str] = _new_id):
        self._gateway = gateway
        self._new_id = id_factory

    def ideate(self, topic: str, num_ideas: int, ctx: ContextBundle) -> list[SeedIdea]:
        """Brainstorm exactly ``num_ideas`` one-line, citation-free ideas."""
        if num_ideas < 1:
            raise ValueError("num_ideas must be >= 1")
        if not topic.strip():
            raise ValueError("topic must be non-empty")
        keywords = [part.strip() for part in topic.split(",") if part.strip()]
        prompt = render(
            TemplateId.IDEATION,
            num_ideas=num_ideas,
            topic=topic,
            context=ctx.render_context(),
            web_results=ctx.render_snippets(),
        )
        lines = self._ideate_once(prompt)
        if len(lines) != num_ideas:
            retry_prompt = RenderedPrompt(
                template_id=f"{prompt.template_id}#retry1",
                text=f"{prompt.text}\nReturn exactly {num_ideas} ideas, one per line.",
                variables=dict(prompt.variables),
            )
            lines = self._ideate_once(retry_prompt)
        if len(lines) != num_ideas:
            raise OutputShapeError(f"expected {num_ideas} ideas, got {len(lines)}")
        return [
            SeedIdea(id=self._new_id(), text=line, source_keywords=list(keywords))
            for line in lines
        ]

    def _ideate_once(self, prompt: Any) -> list[str]:
        completion = self._gateway.complete(Origin.IDEATOR, prompt)
        lines = [_sanitize_idea_line(l) for l in completion.text.splitlines()]
        return [l for l in lines if l]

    def refine_idea(self, original: str, current: SeedIdea, feedback: str) -> SeedIdea:
        """One-line idea revision driven by accepted evaluator feedback."""
        if not feedback.strip():
            raise ValueError("feedback must be non-empty")
        prompt = render(
            TemplateId.IDEA_REVISION,
            query=original,
            current_research_idea=current.text,
            criteria_text=feedback,
        )
        completion = self._gateway.complete(Origin.IDEATOR, prompt)
        lines = [_sanitize_idea_line(l) for l in completion.text.splitlines()]
        lines = [l for l in lines if l]
        if not lines:
            raise OutputShapeError("idea revision produced no usable line")
        return SeedIdea(
            id=self._new_id(),
            text=lines[0],
            source_keywords=list(current.source_keywords),
        )


class Writer:
    """Drafts, revises, and fact-checks the three proposal sections."""

    def __init__(self, gateway: LLMGateway):
        self._gateway = gateway

    # -- drafting -----------------------------------------------------------

    def draft_section(
        self,
        kind: SectionKind,
        idea: SeedIdea,
        upstream: Mapping[SectionKind, SectionDraft],
        ctx: ContextBundle,
        require_context: bool = True,
    ) -> SectionDraft:
        """Draft one section in chain-of-thought order.

        Every kind ordered before ``kind`` must be present in ``upstream``;
        drafting the study plan without research goals is impossible through
        this surface. The returned draft has verified citations.
        """
        missing = [k for k in kind.upstream() if k not in upstream]
        if missing:
            raise ValueError(
                f"cannot draft {kind.label} before {', '.join(m.label for m in missing)}"
            )
        if require_context and kind is SectionKind.LITERATURE_SYNTHESIS and ctx.empty:
            raise ValueError("literature synthesis needs a non-empty retrieval context")

        if kind is SectionKind.LITERATURE_SYNTHESIS:
            prompt = render(
                TemplateId.LITERATURE,
                context=ctx.render_context(),
                question=idea.text,
                web_results=ctx.render_snippets(),
            )
        elif kind is SectionKind.RESEARCH_GOALS:
            prompt = render(
                TemplateId.GOALS,
                context=ctx.render_context(),
                question=idea.text,
                literature=upstream[SectionKind.LITERATURE_SYNTHESIS].text,
            )
        else:
            prompt = render(
                TemplateId.PLAN,
                context=ctx.render_context(),
                question=idea.text,
                literature=upstream[SectionKind.LITERATURE_SYNTHESIS].text,
                research_questions=upstream[SectionKind.RESEARCH_GOALS].text,
            )

        completion = self._gateway.complete(Origin.WRITER, prompt)
        draft = citations.draft_from_text(kind, completion.text.strip(), Origin.WRITER)
        draft = self.verify_citations(draft, ctx)
        self._advisory_checks(draft, upstream)
        return draft

    def _advisory_checks(
        self, draft: SectionDraft, upstream: Mapping[SectionKind, SectionDraft]
    ) -> None:
        if draft.kind is SectionKind.RESEARCH_GOALS:
            count = citations.count_research_questions(draft.text)
            if count not in (2, 3):
                emit_step(
                    Origin.WRITER,
                    "advisory:research_question_count",
                    ok=True,
                    detail=f"detected {count} research questions (expected 2-3)",
                )
        if draft.kind is SectionKind.STUDY_PLAN:
            for source_kind in (SectionKind.LITERATURE_SYNTHESIS, SectionKind.RESEARCH_GOALS):
                source = upstream.get(source_kind)
                if source is None:
                    continue
                overlap = ngram_overlap(draft.text, source.text)
                if overlap > PLAN_OVERLAP_THRESHOLD:
                    emit_step(
                        Origin.WRITER,
                        "advisory:plan_overlap",
                        ok=True,
                        detail=f"{overlap:.2f} 8-gram overlap with {source_kind.label}",
                    )

    # -- revision -----------------------------------------------------------

    def revise_section(
        self,
        prev: SectionDraft,
        suggestions: str,
        user_instruction: str,
        span: tuple[int, int] | None,
        ctx: ContextBundle,
    ) -> RevisionOutcome:
        """Revise a section, optionally scoped to a highlighted span.

        In span mode the instruction is scoped to the excerpt and text
        outside the span is expected to survive up to whitespace; violations
        are reported as overreach (and logged), not silently accepted.
        """
        instruction = user_instruction or "(none)"
        if span is not None:
            start, end = span
            if not (0 <= start < end <= len(prev.text)):
                raise ValueError("span must lie within the previous text")
            excerpt = prev.text[start:end]
            instruction = (
                "Apply the following instruction ONLY to this highlighted excerpt and "
                f'keep all other text unchanged: "{excerpt}"\nInstruction: {user_instruction}'
            )
        prompt = render(
            TemplateId.REVISING,
            component=prev.kind.label,
            previous_content=prev.text,
            evaluation_criteria=suggestions or "(none)",
            user_instruction=instruction,
            context=ctx.render_context(),
            web_results=ctx.render_snippets(),
        )
        completion = self._gateway.complete(Origin.WRITER, prompt)
        draft = citations.draft_from_text(prev.kind, completion.text.strip(), Origin.WRITER)
        draft = self.verify_citations(draft, ctx)

        overreach = False
        if span is not None:
            overreach = self._span_overreach(prev.text, draft.text, span)
            if overreach:
                emit_step(
                    Origin.WRITER,
                    "advisory:span_overreach",
                    ok=True,
                    detail=f"text outside span {span} was not preserved",
                )
        return RevisionOutcome(draft=draft, span_overreach=overreach)

    @staticmethod
    def _span_overreach(previous: str, revised: str, span: tuple[int, int]) -> bool:
        prefix = _normalize_ws(previous[: span[0]])
        suffix = _normalize_ws(previous[span[1] :])
        normalized = _normalize_ws(revised)
        if prefix and not normalized.startswith(prefix):
            return True
        if suffix and not normalized.endswith(suffix):
            return True
        return False

    # -- fact check ---------------------------------------------------------

    def verify_citations(self, draft: SectionDraft, ctx: ContextBundle) -> SectionDraft:
        """Force the draft's citations into the retrieval context.

        Deterministic scan first; on violations, one corrective model rewrite
        with the violations enumerated; then a rescan. Ids that still are not
        in the context get stripped (and the event logged) — the returned
        draft always satisfies citations ⊆ context ids with no malformed
        brackets.
        """
        allowed = ctx.context_ids
        scan = citations.parse_citation_brackets(draft.text)
        invented = [t for t in scan.tokens if t not in allowed]
        if not invented and not scan.malformed:
            jittered = any(
                draft.text[m.span[0] : m.span[1]] != citations.canonical_bracket(m.token)
                for m in scan.wellformed
            )
            if not jittered:
                return draft
            # valid citations with spacing jitter: normalize deterministically,
            # no model call needed
            repaired = citations.enforce_context(draft.text, allowed)
            return SectionDraft(
                kind=draft.kind,
                text=repaired.text,
                citations=repaired.citations,
                origin=draft.origin,
                created_at=draft.created_at,
            )

        violations = []
        if invented:
            violations.append(f"citations not in context: {', '.join(invented)}")
        if scan.malformed:
            violations.append(f"{len(scan.malformed)} malformed citation bracket(s)")
        prompt = render(
            TemplateId.FACT_CHECK,
            section=draft.kind.label,
            draft=draft.text,
            allowed_ids=", ".join(sorted(allowed)) or "(none)",
            violations="; ".join(violations),
        )
        completion = self._gateway.complete(Origin.WRITER, prompt)
        rewritten = citations.draft_from_text(
            draft.kind, completion.text.strip(), draft.origin, created_at=draft.created_at
        )

        rescan = citations.parse_citation_brackets(rewritten.text)
        still_invented = [t for t in rescan.tokens if t not in allowed]
        if not still_invented and not rescan.malformed:
            emit_step(Origin.WRITER, "fact_check:rewrite", ok=True, detail="model repair clean")
            return rewritten

        repaired = citations.enforce_context(rewritten.text, allowed)
        emit_step(
            Origin.WRITER,
            "fact_check:strip",
            ok=True,
            detail=(
                f"stripped invented ids {list(repaired.removed_invented)}; "
                f"repaired {repaired.repaired_malformed} malformed bracket(s)"
            ),
        )
        final = SectionDraft(
            kind=draft.kind,
            text=repaired.text,
            citations=repaired.citations,
            origin=draft.origin,
            created_at=draft.created_at,
        )
        post = citations.validate_section(final, allowed)
        if post.invented or post.malformed_spans:
            raise FactCheckFailure(
                f"citations still violating after strip: {post.invented}, "
                f"{len(post.malformed_spans)} malformed"
            )
        return final


def _render_criteria(criteria: Sequence[Criterion]) -> str:
    return "\n".join(f"{c.id}. {c.name}: {c.description}" for c in criteria)


def _render_feedback(
    criteria: Sequence[Criterion],
    reflections: Mapping[int, Sequence[Reflection]],
) -> str:
    """Serialize criteria and reflections for the suggestions prompt.

    Thumbed-up reflections come first within each criterion and carry a
    "(user agreed)" tag — vote ordering is how user feedback is prioritized.
    """
    blocks: list[str] = []
    for criterion in criteria:
        entries = list(reflections.get(criterion.id, ()))
        if not entries:
            continue
        entries.sort(key=lambda r: {Vote.UP: 0, None: 1, Vote.DOWN: 2}[r.vote])
        lines = [f"Criterion {criterion.id} - {criterion.name}: {criterion.description}"]
        for reflection in entries:
            tag = ""
            if reflection.vote is Vote.UP:
                tag = " (user agreed)"
            elif reflection.vote is Vote.DOWN:
                tag = " (user disagreed)"
            lines.append(f"- {reflection.text}{tag}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


class Evaluator:
    """Critiques proposals against the session criteria and proposes
    actionable improvements. Runs on a different model than the writer and
    ideator (enforced by the gateway's role assignment)."""

    def __init__(self, gateway: LLMGateway):
        self._gateway = gateway

    def evaluate(
        self,
        idea_text: str,
        sections: Mapping[SectionKind, str],
        criteria: Sequence[Criterion],
        ctx: ContextBundle,
        fingerprint: str,
    ) -> EvaluationReport:
        """One reflection per criterion, bound to the proposal fingerprint."""
        for kind in SectionKind:
            if kind not in sections:
                raise ValueError(f"cannot evaluate without the {kind.label} section")
        known_ids = {c.id for c in criteria}

        def check(value: Any) -> bool:
            if not isinstance(value, dict):
                return False
            evaluations = value.get("evaluations")
            if not isinstance(evaluations, list) or not evaluations:
                return False
            seen: set[int] = set()
            for item in evaluations:
                if not isinstance(item, dict):
                    return False
                cid = item.get("criteriaId")
                reflections = item.get("reflections")
                if not isinstance(cid, int) or cid not in known_ids or cid in seen:
                    return False
                if not isinstance(reflections, list) or not reflections:
                    return False
                if not all(isinstance(r, str) and r.strip() for r in reflections):
                    return False
                seen.add(cid)
            return seen == known_ids

        prompt = render(
            TemplateId.CRITIQUES,
            research_idea=idea_text,
            literature_synthesis=sections[SectionKind.LITERATURE_SYNTHESIS],
            research_goals=sections[SectionKind.RESEARCH_GOALS],
            study_plan=sections[SectionKind.STUDY_PLAN],
            criteria_text=_render_criteria(criteria),
            context=ctx.render_context(),
        )
        value = self._gateway.complete_json(Origin.EVALUATOR, prompt, check)
        reflections: dict[int, list[Reflection]] = {}
        for item in value["evaluations"]:
            cid = item["criteriaId"]
            reflections[cid] = [
                Reflection(criterion_id=cid, text=self._clean_reflection(text))
                for text in item["reflections"]
            ]
        return EvaluationReport(
            proposal_version_fingerprint=fingerprint,
            criteria=list(criteria),
            reflections=reflections,
        )

    @staticmethod
    def _clean_reflection(text: str) -> str:
        # Reflections carry no citations; strip any the model slipped in.
        cleaned = citations.strip_citations(text.strip())
        if cleaned != text.strip():
            emit_step(Origin.EVALUATOR, "reflection:strip_citations", ok=True, detail=text)
        return cleaned

    def more_critiques(
        self,
        idea_text: str,
        sections: Mapping[SectionKind, str],
        criterion: Criterion,
        existing: Sequence[Reflection],
        ctx: ContextBundle,
    ) -> list[Reflection]:
        """1-2 new reflections for one criterion, none duplicating existing
        ones (one retry on duplicates, then de-duplication)."""

        def check(value: Any) -> bool:
            if not isinstance(value, dict):
                return False
            reflections = value.get("reflections")
            return (
                isinstance(reflections, list)
                and bool(reflections)
                and all(isinstance(r, str) and r.strip() for r in reflections)
            )

        prompt = render(
            TemplateId.ADDITIONAL_CRITIQUES,
            research_idea=idea_text,
            literature_synthesis=sections[SectionKind.LITERATURE_SYNTHESIS],
            research_goals=sections[SectionKind.RESEARCH_GOALS],
            study_plan=sections[SectionKind.STUDY_PLAN],
            criterion_name=criterion.name,
            criterion_description=criterion.description,
            existing_reflections_text="\n".join(f"- {r.text}" for r in existing) or "(none)",
            context=ctx.render_context(),
        )
        known = {r.text for r in existing}
        texts: list[str] = []
        for attempt in range(2):
            value = self._gateway.complete_json(Origin.EVALUATOR, prompt, check)
            texts = [self._clean_reflection(t) for t in value["reflections"]]
            novel = [t for t in texts if t not in known]
            if novel:
                return [Reflection(criterion_id=criterion.id, text=t) for t in novel[:2]]
            emit_step(
                Origin.EVALUATOR,
                "more_critiques:duplicates",
                ok=True,
                detail=f"attempt {attempt + 1} only echoed existing reflections",
            )
        return []

    def suggest_improvements(
        self,
        idea_text: str,
        sections: Mapping[SectionKind, str],
        criteria: Sequence[Criterion],
        reflections: Mapping[int, Sequence[Reflection]],
    ) -> list[Improvement]:
        """At most one improvement group per criterion, derived from the
        serialized reflections (thumbed-up ones first)."""
        if not any(reflections.get(c.id) for c in criteria):
            raise ValueError("improvements need at least one criterion with a reflection")
        known_ids = {c.id for c in criteria}

        def check(value: Any) -> bool:
            if not isinstance(value, dict):
                return False
            improvements = value.get("improvements")
            if not isinstance(improvements, list) or not improvements:
                return False
            for item in improvements:
                if not isinstance(item, dict):
                    return False
                if not isinstance(item.get("criteriaId"), int) or item["criteriaId"] not in known_ids:
                    return False
                suggestions = item.get("suggestions")
                if not isinstance(suggestions, list) or not suggestions:
                    return False
                if not all(isinstance(s, str) and s.strip() for s in suggestions):
                    return False
            return True

        prompt = render(
            TemplateId.SUGGESTIONS,
            research_idea=idea_text,
            literature_synthesis=sections[SectionKind.LITERATURE_SYNTHESIS],
            research_goals=sections[SectionKind.RESEARCH_GOALS],
            study_plan=sections[SectionKind.STUDY_PLAN],
            criteria_and_feedback=_render_feedback(criteria, reflections),
        )
        value = self._gateway.complete_json(Origin.EVALUATOR, prompt, check)
        names = {c.id: c.name for c in criteria}
        improvements: list[Improvement] = []
        seen: set[int] = set()
        for item in value["improvements"]:
            cid = item["criteriaId"]
            if cid in seen:
                continue  # one group per criterion; keep the first
            seen.add(cid)
            improvements.append(
                Improvement(
                    criterion_id=cid,
                    criterion_name=item.get("criteriaName") or names[cid],
                    suggestions=[s.strip() for s in item["suggestions"]],
                )
            )
        return improvements

    def generate_criterion(self, idea: SeedIdea, existing: Sequence[Criterion]) -> Criterion:
        """A new criterion with a 1-3 word name distinct from existing names."""

        def check(value: Any) -> bool:
            if not isinstance(value, dict):
                return False
            name = value.get("name")
            description = value.get("description")
            if not isinstance(name, str) or not isinstance(description, str):
                return False
            words = name.strip().split()
            return 1 <= len(words) <= 3 and bool(description.strip())

        prompt = render(
            TemplateId.NEW_CRITERION,
            research_idea=idea.text,
            criteria_text=_render_criteria(existing) or "(none)",
        )
        taken = {c.name.lower() for c in existing}
        for _ in range(2):
            value = self._gateway.complete_json(Origin.EVALUATOR, prompt, check)
            name = value["name"].strip()
            if name.lower() not in taken:
                next_id = max((c.id for c in existing), default=0) + 1
                return Criterion(id=next_id, name=name, description=value["description"].strip())
        raise DuplicateCriterion(f"model kept proposing an existing criterion name: {name!r}")
