"""Harness CLI: build ablation pairs from a seeds file, run judges over a
trials directory, and tally verdicts into tables. All artifacts are plain
files suitable for check-in."""

from __future__ import annotations

import json
import uuid
from pathlib import Path

import click

from . import harness
from .gateway import (
    HTTPChatProvider,
    LLMGateway,
    Transcript,
    assign_models,
)
from .model import SeedIdea
from .retrieval import (
    HashingEmbedder,
    PaperRecord,
    PaperSection,
    PaperSource,
    RetrievalConfig,
    RetrievalPipeline,
    VectorIndex,
)


def _load_corpus(path: Path) -> list[PaperRecord]:
    papers = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        papers.append(
            PaperRecord(
                citation_id=record["citation_id"],
                title=record["title"],
                authors=record.get("authors", []),
                year=record.get("year", 0),
                abstract=record.get("abstract", ""),
                source=PaperSource(record.get("source", "semantic_scholar")),
                url=record.get("url", ""),
                venue=record.get("venue"),
                sections=[PaperSection(label, text) for label, text in record.get("sections", [])],
            )
        )
    return papers


def _gateway(transcript_path: str | None, base_url: str | None, api_key: str | None) -> LLMGateway:
    assignment = assign_models()
    if transcript_path:
        return LLMGateway(assignment=assignment, transcript=Transcript.load(transcript_path))
    if not base_url:
        raise click.UsageError("either --transcript or --llm-base-url is required")
    return LLMGateway(assignment=assignment, provider=HTTPChatProvider(base_url, api_key))


@click.group()
def main() -> None:
    """Ablation and judging harness."""


@main.command()
@click.option("--seeds", type=click.Path(exists=True, path_type=Path), required=True,
              help="JSON file: list of {text, abstract} seed entries.")
@click.option("--corpus", type=click.Path(exists=True, path_type=Path), default=None,
              help="JSONL corpus to index for the retrieval variant.")
@click.option("--out", type=click.Path(path_type=Path), required=True, help="Trials directory.")
@click.option("--transcript", type=click.Path(exists=True), default=None,
              help="Replay transcript (offline mode).")
@click.option("--llm-base-url", envvar="IDEASMITH_LLM_BASE_URL", default=None)
@click.option("--llm-api-key", envvar="IDEASMITH_LLM_API_KEY", default=None)
@click.option("--blinding-seed", type=int, default=None,
              help="Fix the A/B blinding seed (otherwise random, recorded per trial).")
def pair(seeds: Path, corpus: Path | None, out: Path, transcript: str | None,
         llm_base_url: str | None, llm_api_key: str | None, blinding_seed: int | None) -> None:
    """Build retrieval-on/off proposal pairs from a seeds file."""
    gateway = _gateway(transcript, llm_base_url, llm_api_key)
    config = RetrievalConfig()
    index = VectorIndex(HashingEmbedder(config.embedding_dimension), config)
    pipeline = RetrievalPipeline(gateway, index, config=config)
    if corpus:
        papers = _load_corpus(corpus)
        pipeline.ingest(papers)

    entries = json.loads(seeds.read_text(encoding="utf-8"))
    for i, entry in enumerate(entries, start=1):
        idea = SeedIdea(id=uuid.uuid4().hex[:12], text=entry["text"])
        abstract = entry.get("abstract")
        if not abstract:
            abstract = pipeline.hypothetical_abstract(idea).hypothetical_abstract
        trial = harness.build_pair(
            idea,
            abstract,
            gateway,
            pipeline,
            trial_id=f"trial-{i:03d}",
            blinding_seed=blinding_seed,
        )
        path = harness.save_trial(trial, out)
        click.echo(f"wrote {path}")


@main.command()
@click.option("--trials", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--judges", required=True, help="Comma-separated judge model identifiers.")
@click.option("--out", type=click.Path(path_type=Path), required=True, help="Verdicts directory.")
@click.option("--llm-base-url", envvar="IDEASMITH_LLM_BASE_URL", required=True)
@click.option("--llm-api-key", envvar="IDEASMITH_LLM_API_KEY", default=None)
def judge(trials: Path, judges: str, out: Path, llm_base_url: str, llm_api_key: str | None) -> None:
    """Run the blinded multi-judge comparison over a trials directory."""
    provider = HTTPChatProvider(llm_base_url, llm_api_key)
    judge_ids = [j.strip() for j in judges.split(",") if j.strip()]
    out.mkdir(parents=True, exist_ok=True)
    for trial in harness.load_trials(trials):
        verdicts = harness.run_judges(trial, judge_ids, provider)
        path = out / f"{trial.trial_id}.verdicts.json"
        path.write_text(
            json.dumps(
                [{"judge": v.judge, "choice": v.choice.value, "note": v.note} for v in verdicts],
                indent=2,
            ),
            encoding="utf-8",
        )
        click.echo(f"wrote {path}")


@main.command(name="tally")
@click.option("--trials", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--verdicts", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True, help="JSON tally output.")
@click.option("--table", type=click.Path(path_type=Path), default=None, help="Plain-text table output.")
def tally_cmd(trials: Path, verdicts: Path, out: Path, table: Path | None) -> None:
    """Tally verdicts into per-trial counts and winners."""
    results = []
    for trial in harness.load_trials(trials):
        verdict_path = verdicts / f"{trial.trial_id}.verdicts.json"
        if not verdict_path.exists():
            continue
        raw = json.loads(verdict_path.read_text(encoding="utf-8"))
        results.append(
            (
                trial,
                [
                    harness.Verdict(
                        judge=v["judge"],
                        choice=harness.Choice(v["choice"]),
                        note=v.get("note", ""),
                    )
                    for v in raw
                ],
            )
        )
    result = harness.tally(results)
    out.write_text(json.dumps(result.to_dict(), indent=2), encoding="utf-8")
    text = result.as_text()
    if table:
        table.write_text(text + "\n", encoding="utf-8")
    click.echo(text)


@main.command()
@click.option("--input", "input_path", type=click.Path(exists=True, path_type=Path), required=True,
              help="JSON list of {idea, rankings: {tool: rank}} records.")
@click.option("--out", type=click.Path(path_type=Path), required=True)
def ranks(input_path: Path, out: Path) -> None:
    """Tabulate human-provided tool rankings (input-only; no tools invoked)."""
    records = json.loads(input_path.read_text(encoding="utf-8"))
    summary = harness.ingest_rankings(records)
    out.write_text(json.dumps(summary, indent=2), encoding="utf-8")
    click.echo(json.dumps(summary["mean_rank"], indent=2))


if __name__ == "__main__":
    main()
