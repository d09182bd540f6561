# file: controllers/extraction.py

import asyncio
import os
from decimal import Decimal
from pathlib import Path
from typing import Optional

import structlog
import typer
from rich.table import Table

from app.controllers.common import active_ontology, console, handle_errors, settings_for
from app.models.corpus import RunConfig, RunState
from app.models.extraction import BackendConfig, ExtractionConfig, PriceTable
from app.services.backends import HttpBackend, MockBackend
from app.services.corpus_service import failed_backend, ingest_corpus, run_batch, summary_rows, write_summary_csv
from app.services.generation_service import estimate_cost, load_guidance_rules
from app.storage.run_state import load_state
from app.utils.errors import EXIT_BACKEND, LexKGError
from app.utils.settings import Settings

logger = structlog.get_logger(__name__)

STATE_FILE = "run_state.json"
MOCK_MODEL_ID = "mock"


class MissingCredential(LexKGError):
    pass


def _backend(settings: Settings, mock: Optional[Path]):
    if mock is not None:
        return MockBackend(mock), MOCK_MODEL_ID
    if not os.getenv(settings.api_key_env):
        raise MissingCredential(
            f"Set {settings.api_key_env} in the environment (or .env) to call {settings.endpoint}, "
            "or pass --mock <fixtures> for an offline run"
        )
    config = BackendConfig(
        endpoint=settings.endpoint,
        model=settings.model,
        temperature=settings.temperature,
        max_output_tokens=settings.max_output_tokens,
        timeout=settings.timeout,
        api_key_env=settings.api_key_env,
        transport_retries=settings.transport_retries,
        retry_backoff=settings.retry_backoff,
    )
    return HttpBackend(config), settings.model


def _prices(settings: Settings, price_in: Optional[float] = None, price_out: Optional[float] = None) -> PriceTable:
    return PriceTable(
        input_per_million=Decimal(str(price_in if price_in is not None else settings.price_input_per_million)),
        output_per_million=Decimal(str(price_out if price_out is not None else settings.price_output_per_million)),
    )


def _print_summary(state: RunState) -> None:
    table = Table(title="Extraction run")
    for column in ("doc_id", "status", "attempts", "tokens in", "tokens out", "cost (USD)", "error"):
        table.add_column(column)
    for row in summary_rows(state):
        table.add_row(
            row.doc_id, row.status, str(row.attempts), str(row.input_tokens), str(row.output_tokens),
            f"{row.cost:.6f}", row.error,
        )
    console.print(table)
    totals = ", ".join(f"{key}={value}" for key, value in state.totals.items() if value)
    console.print(f"Totals: {totals}; cost {state.total_cost:.6f} USD", markup=False, highlight=False, soft_wrap=True)


@handle_errors
def extract(
    ctx: typer.Context,
    corpus: Path = typer.Option(..., "--corpus", help="JSONL file or directory of .txt/.pdf decisions."),
    out: Path = typer.Option(..., "--out", help="Directory for per-document graphs and reports."),
    mock: Optional[Path] = typer.Option(None, "--mock", help="Replay responses from a fixture directory."),
    format: Optional[str] = typer.Option(None, "--format", help="jsonl or txt-dir; inferred when omitted."),
    pdf_extractor: Optional[str] = typer.Option(
        None, "--pdf-extractor", help="Command template with {in} and {out} placeholders."
    ),
    rules: Optional[Path] = typer.Option(None, "--rules", help="Guidance rules file, one rule per line."),
    strict: bool = typer.Option(False, "--strict", help="Strict validation (no type inference)."),
    max_inflight: Optional[int] = typer.Option(None, "--max-inflight", min=1),
    max_retries: Optional[int] = typer.Option(None, "--max-retries", min=0),
    keep_invalid: Optional[bool] = typer.Option(None, "--keep-invalid/--drop-invalid"),
    state_path: Optional[Path] = typer.Option(None, "--state", help=f"Run state file (default <out>/{STATE_FILE})."),
    summary_csv: Optional[Path] = typer.Option(None, "--summary-csv"),
    granularity: Optional[str] = typer.Option(None, "--granularity", help="full or compact ontology in the prompt."),
):
    """Turn every decision of the corpus into a validated Turtle graph; resumable."""
    settings = settings_for(
        ctx,
        guidance_rules_path=rules,
        max_inflight=max_inflight,
        max_retries=max_retries,
        keep_invalid=keep_invalid,
        validation_mode="strict" if strict else None,
        ontology_granularity=granularity,
    )
    ontology = active_ontology(settings)
    guidance = load_guidance_rules(settings.guidance_rules_path)
    backend, model_id = _backend(settings, mock)
    docs = ingest_corpus(corpus, format=format, pdf_extractor=pdf_extractor)

    extraction = ExtractionConfig(
        rules=guidance,
        granularity=settings.ontology_granularity,
        max_retries=settings.max_retries,
        validation_mode=settings.validation_mode,
        max_prompt_tokens=settings.max_prompt_tokens,
        prices=_prices(settings),
    )
    run_config = RunConfig(
        max_inflight=settings.max_inflight,
        max_retries=settings.max_retries,
        keep_invalid=settings.keep_invalid,
        output_dir=out,
        state_path=state_path or out / STATE_FILE,
    )
    logger.info("extract_started", documents=len(docs), model=model_id, max_inflight=run_config.max_inflight)
    state = asyncio.run(run_batch(docs, backend, ontology, run_config, extraction, model_id))

    _print_summary(state)
    if summary_csv:
        write_summary_csv(state, summary_csv)
    if failed_backend(state):
        raise typer.Exit(EXIT_BACKEND)


@handle_errors
def cost(
    ctx: typer.Context,
    state_path: Path = typer.Argument(..., help="Run state JSON written by extract."),
    price_in: Optional[float] = typer.Option(None, "--price-in", min=0, help="USD per 1M input tokens."),
    price_out: Optional[float] = typer.Option(None, "--price-out", min=0, help="USD per 1M output tokens."),
):
    """Price the recorded token usage of a run: total, mean per document and per 1,000 documents."""
    state = load_state(state_path)
    if state is None:
        raise FileNotFoundError(f"Run state {state_path} does not exist")
    prices = _prices(settings_for(ctx), price_in, price_out)
    records = state.cost_records()
    total = estimate_cost(records, prices)
    documents = len(records)
    mean = total / documents if documents else Decimal(0)

    table = Table(title=f"Cost at {prices.input_per_million} / {prices.output_per_million} USD per 1M tokens")
    table.add_column("metric")
    table.add_column("value", justify="right")
    table.add_row("documents", str(documents))
    table.add_row("requests", str(sum(r.requests for r in records)))
    table.add_row("input tokens", str(sum(r.input_tokens for r in records)))
    table.add_row("output tokens", str(sum(r.output_tokens for r in records)))
    table.add_row("total (USD)", f"{total:.6f}")
    table.add_row("mean per document (USD)", f"{mean:.6f}")
    table.add_row("per 1,000 documents (USD)", f"{mean * 1000:.2f}")
    console.print(table)
