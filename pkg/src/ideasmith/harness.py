"""Ablation and judging harness: retrieval-on vs retrieval-off proposal
pairs expanded from one shared abstract, blinded citation-stripped
comparison by multiple model judges, and per-trial tallies.

Blinding: the judge prompt carries only the two stripped texts (in an order
fixed by a recorded random seed) and the evaluation criteria — condition
labels never reach a judge.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import citations
from .agents import ContextBundle, Writer
from .gateway import LLMGateway, Provider, ProviderError, SamplingParams
from .model import Criterion, DEFAULT_CRITERIA, SectionDraft, SectionKind, SeedIdea
from .prompts import RenderedPrompt
from .retrieval import RetrievalPipeline

__all__ = [
    "Choice",
    "Condition",
    "PairTrial",
    "Tally",
    "TrialTally",
    "Verdict",
    "build_pair",
    "ingest_rankings",
    "run_judges",
    "strip_citations",
    "tally",
]


class Condition(str, Enum):
    RAG = "rag"
    NON_RAG = "non_rag"


class Choice(str, Enum):
    A = "a"
    B = "b"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class TrialVariant:
    condition: Condition
    text: str


@dataclass
class PairTrial:
    """One ablation trial: two proposals expanded from the same seed idea
    and the same first hypothetical abstract, blinded into slots A and B."""

    trial_id: str
    seed_text: str
    shared_abstract: str
    variant_a: TrialVariant
    variant_b: TrialVariant
    blinding_seed: int

    def condition_of(self, choice: Choice) -> Condition | None:
        if choice is Choice.A:
            return self.variant_a.condition
        if choice is Choice.B:
            return self.variant_b.condition
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "trial_id": self.trial_id,
            "seed_text": self.seed_text,
            "shared_abstract": self.shared_abstract,
            "blinding_seed": self.blinding_seed,
            "variant_a": {"condition": self.variant_a.condition.value, "text": self.variant_a.text},
            "variant_b": {"condition": self.variant_b.condition.value, "text": self.variant_b.text},
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PairTrial":
        return cls(
            trial_id=data["trial_id"],
            seed_text=data["seed_text"],
            shared_abstract=data["shared_abstract"],
            blinding_seed=data["blinding_seed"],
            variant_a=TrialVariant(
                Condition(data["variant_a"]["condition"]), data["variant_a"]["text"]
            ),
            variant_b=TrialVariant(
                Condition(data["variant_b"]["condition"]), data["variant_b"]["text"]
            ),
        )


@dataclass(frozen=True)
class Verdict:
    judge: str
    choice: Choice
    note: str = ""


def strip_citations(text: str) -> str:
    """Remove every in-text citation bracket before side-by-side comparison
    (see :func:`ideasmith.citations.strip_citations`)."""
    return citations.strip_citations(text)


def _expand(
    writer: Writer,
    idea: SeedIdea,
    ctx: ContextBundle,
    with_context: bool,
) -> str:
    """Three-section chain-of-thought expansion; the ablated variant binds an
    empty context and cites nothing."""
    bundle = ctx if with_context else ContextBundle()
    upstream: dict[SectionKind, SectionDraft] = {}
    parts: list[str] = []
    for kind in SectionKind:
        draft = writer.draft_section(kind, idea, upstream, bundle, require_context=with_context)
        upstream[kind] = draft
        parts.append(f"{kind.label}\n{draft.text}")
    return "\n\n".join(parts)


def build_pair(
    seed: SeedIdea,
    shared_abstract: str,
    gateway: LLMGateway,
    pipeline: RetrievalPipeline,
    *,
    trial_id: str | None = None,
    blinding_seed: int | None = None,
    pinned: Sequence[str] = (),
) -> PairTrial:
    """Expand the seed idea twice — once with retrieval context, once without
    — and blind the pair. Both variants reuse the same shared abstract as the
    retrieval query, so retrieval is the only difference between them."""
    if not shared_abstract.strip():
        raise ValueError("shared abstract must be non-empty")
    writer = Writer(gateway)
    embedding = pipeline.index.embed_text(shared_abstract)

    rag_sections: list[str] = []
    upstream: dict[SectionKind, SectionDraft] = {}
    for kind in SectionKind:
        chunks = tuple(pipeline.index.retrieve(embedding, kind, pinned=pinned))
        ctx = ContextBundle(chunks=chunks)
        draft = writer.draft_section(kind, seed, upstream, ctx)
        upstream[kind] = draft
        rag_sections.append(f"{kind.label}\n{draft.text}")
    rag_text = "\n\n".join(rag_sections)
    non_rag_text = _expand(writer, seed, ContextBundle(), with_context=False)

    blinding_seed = random.randrange(2**31) if blinding_seed is None else blinding_seed
    flipped = random.Random(blinding_seed).random() < 0.5
    rag = TrialVariant(Condition.RAG, rag_text)
    non_rag = TrialVariant(Condition.NON_RAG, non_rag_text)
    variant_a, variant_b = (non_rag, rag) if flipped else (rag, non_rag)
    return PairTrial(
        trial_id=trial_id or f"trial-{blinding_seed}",
        seed_text=seed.text,
        shared_abstract=shared_abstract,
        variant_a=variant_a,
        variant_b=variant_b,
        blinding_seed=blinding_seed,
    )


JUDGE_PROMPT = """You are comparing two anonymized research proposals that address the same seed idea.

Proposal A:
{a}

Proposal B:
{b}

Evaluation criteria:
{criteria}

Select the proposal that better satisfies the criteria overall, or answer UNDECIDED if neither is preferable.
Reply with exactly one token: A, B, or UNDECIDED.
"""


def _judge_prompt(trial: PairTrial, criteria: Sequence[Criterion]) -> RenderedPrompt:
    text = JUDGE_PROMPT.format(
        a=strip_citations(trial.variant_a.text),
        b=strip_citations(trial.variant_b.text),
        criteria="\n".join(f"- {c.name}: {c.description}" for c in criteria),
    )
    return RenderedPrompt(
        template_id="judge_pairwise",
        text=text,
        variables={"trial": trial.trial_id},
    )


def _map_choice(reply: str) -> Choice | None:
    tokens = [t.strip(".,:;!").lower() for t in reply.split()]
    hits = {t for t in tokens if t in ("a", "b", "undecided")}
    if len(hits) != 1:
        return None
    return Choice(hits.pop())


def run_judges(
    trial: PairTrial,
    judges: Sequence[str],
    provider: Provider,
    criteria: Sequence[Criterion] = DEFAULT_CRITERIA,
    params: SamplingParams = SamplingParams(temperature=0.0, max_tokens=16),
) -> list[Verdict]:
    """One verdict per judge model over the blinded, citation-stripped pair.

    Unmappable replies are retried once and then recorded as undecided with a
    note; a judge whose provider fails is skipped (partial verdicts allowed).
    """
    if not judges:
        raise ValueError("at least one judge model is required")
    prompt = _judge_prompt(trial, criteria)
    verdicts: list[Verdict] = []
    for judge in judges:
        try:
            reply = provider.complete(judge, prompt.text, params)
            choice = _map_choice(reply)
            note = ""
            if choice is None:
                reply = provider.complete(judge, prompt.text, params)
                choice = _map_choice(reply)
            if choice is None:
                choice = Choice.UNDECIDED
                note = f"unmappable reply recorded as undecided: {reply[:120]!r}"
        except ProviderError as exc:
            verdicts.append(Verdict(judge=judge, choice=Choice.UNDECIDED, note=f"skipped: {exc}"))
            continue
        verdicts.append(Verdict(judge=judge, choice=choice, note=note))
    return verdicts


class Winner(str, Enum):
    RAG = "rag"
    NON_RAG = "non_rag"
    SPLIT = "split"


@dataclass(frozen=True)
class TrialTally:
    trial_id: str
    rag: int
    non_rag: int
    undecided: int
    winner: Winner
    per_judge: tuple[tuple[str, str], ...]

    @property
    def total(self) -> int:
        return self.rag + self.non_rag + self.undecided


@dataclass
class Tally:
    trials: list[TrialTally] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "trials": [
                {
                    "trial_id": t.trial_id,
                    "rag": t.rag,
                    "non_rag": t.non_rag,
                    "undecided": t.undecided,
                    "winner": t.winner.value,
                    "per_judge": [list(pair) for pair in t.per_judge],
                }
                for t in self.trials
            ]
        }

    def as_text(self) -> str:
        """Plain-text table: one row per trial and condition, checkmarks per
        judge."""
        if not self.trials:
            return "(no trials)"
        judges = [judge for judge, _ in self.trials[0].per_judge]
        header = ["trial", "condition", *judges, "winner"]
        rows: list[list[str]] = []
        for t in self.trials:
            picks = dict(t.per_judge)
            for condition in (Condition.RAG, Condition.NON_RAG):
                marks = [
                    "x" if picks.get(judge) == condition.value else "-" for judge in judges
                ]
                rows.append(
                    [
                        t.trial_id,
                        condition.value,
                        *marks,
                        t.winner.value if condition is Condition.RAG else "",
                    ]
                )
        widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
        lines = [
            "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row))
            for row in [header, *rows]
        ]
        return "\n".join(lines)


def _winner(rag: int, non_rag: int, undecided: int) -> Winner:
    if undecided >= max(rag, non_rag):
        return Winner.SPLIT
    if rag > non_rag:
        return Winner.RAG
    if non_rag > rag:
        return Winner.NON_RAG
    return Winner.SPLIT


def tally(results: Sequence[tuple[PairTrial, Sequence[Verdict]]]) -> Tally:
    """Per-trial counts and an aggregate winner (majority; split on ties or
    an undecided majority)."""
    if not results:
        raise ValueError("tally needs at least one trial")
    table = Tally()
    for trial, verdicts in results:
        rag = non_rag = undecided = 0
        per_judge: list[tuple[str, str]] = []
        for verdict in verdicts:
            condition = trial.condition_of(verdict.choice)
            if condition is Condition.RAG:
                rag += 1
                per_judge.append((verdict.judge, Condition.RAG.value))
            elif condition is Condition.NON_RAG:
                non_rag += 1
                per_judge.append((verdict.judge, Condition.NON_RAG.value))
            else:
                undecided += 1
                per_judge.append((verdict.judge, "undecided"))
        table.trials.append(
            TrialTally(
                trial_id=trial.trial_id,
                rag=rag,
                non_rag=non_rag,
                undecided=undecided,
                winner=_winner(rag, non_rag, undecided),
                per_judge=tuple(per_judge),
            )
        )
    return table


def ingest_rankings(records: Sequence[Mapping[str, Any]]) -> dict[str, Any]:
    """Tabulate human-provided rank files (1 = best) across external tools.

    Input records look like {"idea": ..., "rankings": {tool: rank}}. This is
    input-only: no external tool is invoked.
    """
    if not records:
        raise ValueError("no ranking records")
    tools: dict[str, list[int]] = {}
    rows = []
    for record in records:
        rankings = record["rankings"]
        rows.append({"idea": record["idea"], "rankings": dict(rankings)})
        for tool, rank in rankings.items():
            tools.setdefault(tool, []).append(int(rank))
    means = {tool: sum(ranks) / len(ranks) for tool, ranks in tools.items()}
    ordered = sorted(means.items(), key=lambda kv: kv[1])
    return {
        "ideas": rows,
        "mean_rank": {tool: round(mean, 3) for tool, mean in ordered},
        "best_tool": ordered[0][0],
    }


def save_trial(trial: PairTrial, directory: Path) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{trial.trial_id}.json"
    path.write_text(json.dumps(trial.to_dict(), indent=2, ensure_ascii=False), encoding="utf-8")
    return path


def load_trials(directory: Path) -> list[PairTrial]:
    trials = []
    for path in sorted(directory.glob("*.json")):
        trials.append(PairTrial.from_dict(json.loads(path.read_text(encoding="utf-8"))))
    return trials
