# file: services/corpus_service.py

import asyncio
import json
import shlex
import subprocess
import tempfile
from pathlib import Path
from typing import Optional, Sequence, Union

import structlog
from pydantic import ValidationError

from app.models.corpus import DocStatus, DocumentRecord, RunConfig, RunState, RunSummaryRow
from app.models.extraction import ExtractionConfig, ExtractionOutcome
from app.models.ontology import Ontology
from app.models.rdf import Literal, Triple, default_prefixes, fca
from app.services.backends import GenerationBackend
from app.services.generation_service import run_extraction
from app.services.graph_store import BlankNodeAllocator, Graph, relabel_blank_nodes
from app.services.turtle_service import parse_ntriples, parse_turtle
from app.storage.outputs import doc_id_of, graph_files, write_csv, write_outcome
from app.storage.run_state import config_fingerprint, open_state, save_state
from app.utils.errors import DuplicateId, EmptyCorpus, MalformedRecord, ParseError

logger = structlog.get_logger(__name__)

FROM_DOCUMENT = fca("fromDocument")
SUMMARY_FIELDS = ["doc_id", "status", "attempts", "input_tokens", "output_tokens", "cost", "error"]


def _jsonl_records(path: Path) -> list[DocumentRecord]:
    records = []
    with path.open(encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(number, f"invalid JSON ({exc.msg})") from None
            if not isinstance(data, dict):
                raise MalformedRecord(number, "expected a JSON object")
            try:
                records.append(DocumentRecord(
                    id=data.get("id"),
                    text=data.get("text"),
                    date=data.get("date"),
                    source_path=str(path),
                ))
            except ValidationError as exc:
                reason = "; ".join(f"{'.'.join(map(str, e['loc']))}: {e['msg']}" for e in exc.errors())
                raise MalformedRecord(number, reason) from None
    return records


def _pdf_to_text(pdf: Path, command: str) -> str:
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / f"{pdf.stem}.txt"
        argv = [part.replace("{in}", str(pdf)).replace("{out}", str(out)) for part in shlex.split(command)]
        completed = subprocess.run(argv, capture_output=True, text=True)
        if completed.returncode != 0 or not out.exists():
            raise MalformedRecord(1, f"PDF extractor failed on {pdf}: {completed.stderr.strip()[:200]}")
        return out.read_text(encoding="utf-8")


def _directory_records(path: Path, pdf_extractor: Optional[str]) -> list[DocumentRecord]:
    records = []
    for file in sorted(p for p in path.rglob("*") if p.is_file()):
        suffix = file.suffix.lower()
        if suffix == ".txt":
            text = file.read_text(encoding="utf-8")
        elif suffix == ".pdf":
            if not pdf_extractor:
                logger.warning("pdf_skipped", path=str(file), reason="no --pdf-extractor given")
                continue
            text = _pdf_to_text(file, pdf_extractor)
        else:
            continue
        try:
            records.append(DocumentRecord(id=file.stem, text=text, source_path=str(file)))
        except ValidationError:
            raise MalformedRecord(1, f"{file} has no text") from None
    return records


def ingest_corpus(
    path: Union[str, Path],
    format: Optional[str] = None,
    pdf_extractor: Optional[str] = None,
) -> list[DocumentRecord]:
    """JSONL file (one {"id", "text", "date"?} object per line) or a directory of .txt / .pdf files."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Corpus {path} does not exist")
    format = format or ("txt-dir" if path.is_dir() else "jsonl")
    if format == "jsonl":
        records = _jsonl_records(path)
    elif format == "txt-dir":
        records = _directory_records(path, pdf_extractor)
    else:
        raise MalformedRecord(0, f"unknown corpus format '{format}'")
    seen = set()
    for record in records:
        if record.id in seen:
            raise DuplicateId(record.id)
        seen.add(record.id)
    if not records:
        raise EmptyCorpus(str(path))
    logger.info("corpus_ingested", path=str(path), documents=len(records), format=format)
    return records


def run_fingerprint(ontology: Ontology, extraction: ExtractionConfig, model_id: str) -> str:
    return config_fingerprint(
        ontology.source.encode("utf-8"),
        "\n".join(extraction.rules.rules).encode("utf-8"),
        model_id,
    )


async def run_batch(
    docs: Sequence[DocumentRecord],
    backend: GenerationBackend,
    ontology: Ontology,
    config: RunConfig,
    extraction: ExtractionConfig,
    model_id: str,
) -> RunState:
    """Extracts every non-terminal document with at most `max_inflight` in flight.

    Workers report to this coordinator over a queue; only the coordinator touches the state file.
    """
    extraction = extraction.model_copy(update={"max_retries": config.max_retries})
    state = open_state(config.state_path, run_fingerprint(ontology, extraction, model_id))
    for doc in docs:
        state.add_pending(doc.id)
    save_state(state, config.state_path)

    todo = [doc for doc in docs if not state.docs[doc.id].status.terminal]
    if not todo:
        logger.info("batch_nothing_to_do", documents=len(docs))
        return state
    Path(config.output_dir).mkdir(parents=True, exist_ok=True)
    queue: asyncio.Queue = asyncio.Queue()
    semaphore = asyncio.Semaphore(config.max_inflight)

    async def worker(doc: DocumentRecord) -> None:
        async with semaphore:
            await queue.put(("started", doc.id, None))
            try:
                outcome = await run_extraction(doc, backend, ontology, extraction)
                try:
                    write_outcome(config.output_dir, outcome, config.keep_invalid)
                except OSError as exc:
                    logger.error("output_write_failed", doc_id=doc.id, error=str(exc))
                    outcome = outcome.model_copy(update={"error": f"I/O error: {exc}"})
                await queue.put(("finished", doc.id, outcome))
            except Exception as exc:
                await queue.put(("failed", doc.id, exc))

    tasks = [asyncio.create_task(worker(doc)) for doc in todo]
    remaining = len(tasks)
    try:
        while remaining:
            kind, doc_id, payload = await queue.get()
            if kind == "started":
                state.transition(doc_id, DocStatus.RUNNING)
                save_state(state, config.state_path)
                continue
            remaining -= 1
            if kind == "failed":
                logger.error("worker_crashed", doc_id=doc_id, error=repr(payload))
                raise payload
            outcome: ExtractionOutcome = payload
            state.transition(
                doc_id,
                DocStatus(outcome.status.value),
                attempts=len(outcome.attempts),
                error=outcome.error,
                cost=outcome.cost,
            )
            save_state(state, config.state_path)
            logger.info("document_done", doc_id=doc_id, status=outcome.status.value,
                        attempts=len(outcome.attempts), left=remaining)
    finally:
        for task in tasks:
            task.cancel()
        await asyncio.gather(*tasks, return_exceptions=True)
    return state


def summary_rows(state: RunState) -> list[RunSummaryRow]:
    return [
        RunSummaryRow(
            doc_id=doc_id,
            status=doc.status.value,
            attempts=doc.attempts,
            input_tokens=doc.cost.input_tokens,
            output_tokens=doc.cost.output_tokens,
            cost=doc.cost.cost,
            error=doc.error or "",
        )
        for doc_id, doc in sorted(state.docs.items())
    ]


def write_summary_csv(state: RunState, path: Path) -> Path:
    return write_csv(path, SUMMARY_FIELDS, [row.model_dump(mode="json") for row in summary_rows(state)])


def failed_backend(state: RunState) -> bool:
    return any(doc.status == DocStatus.BACKEND_FAILED for doc in state.docs.values())


def merge_outputs(output_dir: Union[str, Path]) -> Graph:
    """Union of every per-document graph; blank nodes renamed per file, subjects tagged fca:fromDocument."""
    merged = Graph(prefixes=default_prefixes())
    allocator = BlankNodeAllocator()
    for path in graph_files(output_dir):
        try:
            doc = parse_turtle(path.read_text(encoding="utf-8"), source=path.name)
        except ParseError as exc:
            raise exc.with_source(str(path)) from None
        relabelled = relabel_blank_nodes(doc.graph, allocator)
        merged.prefixes.update(doc.prefixes)
        provenance = Literal(doc_id_of(path))
        merged.update(relabelled)
        for subject in relabelled.subjects():
            merged.insert(Triple(subject, FROM_DOCUMENT, provenance))
    logger.info("outputs_merged", files=len(graph_files(output_dir)), triples=len(merged))
    return merged


def load_graph(path: Union[str, Path]) -> Graph:
    """Output directory (merged on the fly), N-Triples file (.nt) or Turtle file."""
    path = Path(path)
    if path.is_dir():
        return merge_outputs(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".nt":
        return parse_ntriples(text, source=path.name)
    return parse_turtle(text, source=path.name).graph
