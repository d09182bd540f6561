# file: services/generation_service.py

import math
import re
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Optional

import structlog

from app.models.corpus import DocumentRecord
from app.models.extraction import (
    Attempt,
    BackendReply,
    CostRecord,
    ExtractionConfig,
    ExtractionOutcome,
    ExtractionStatus,
    GuidanceRules,
    ParseErrorInfo,
    PriceTable,
    Prompt,
)
from app.models.ontology import Ontology
from app.services.backends import GenerationBackend
from app.services.ontology_service import DATA_DIR, ontology_prompt_text
from app.services.turtle_service import parse_turtle
from app.services.validation_service import validate_graph
from app.utils.errors import BackendError, EmptyInput, EmptyResponse, OversizedPrompt, ParseError

logger = structlog.get_logger(__name__)

RULES_PATH = DATA_DIR / "guidance_rules.txt"
MILLION = Decimal(1_000_000)

SYSTEM_PROMPT = (
    "You are a legal knowledge engineer. You read French criminal court decisions and describe them "
    "as RDF knowledge graphs in Turtle, using only the vocabulary you are given."
)

OUTPUT_INSTRUCTIONS = """Return the knowledge graph as a single fenced code block that starts with ```turtle and ends with ```.
Declare every prefix you use with @prefix inside the block.
Use only the classes, properties and individuals of the ontology above and follow every rule.
After the code block you may add a section that starts with the line COMMENTS: containing remarks on facts the ontology could not express and suggestions for improving it."""

_FENCE = re.compile(r"```[ \t]*(?:[A-Za-z0-9_+-]+(?=\s))?[ \t]*\r?\n?(.*?)```", re.S)
_COMMENTS_HEADER = re.compile(r"^[ \t#*]*COMMENTS\b[ \t]*:?[ \t*]*", re.M)


def load_guidance_rules(path: Optional[Path] = None) -> GuidanceRules:
    return GuidanceRules.from_file(path or RULES_PATH)


def _section(title: str, body: str) -> str:
    return f"=== {title} ===\n{body}"


def assemble_prompt(ontology_turtle: str, rules: GuidanceRules, doc_text: str) -> Prompt:
    """Fixed-order prompt: ONTOLOGY, RULES, DOCUMENT, OUTPUT INSTRUCTIONS. Never truncates."""
    if not ontology_turtle.strip():
        raise EmptyInput("ONTOLOGY")
    if not rules.rules:
        raise EmptyInput("RULES")
    if not doc_text.strip():
        raise EmptyInput("DOCUMENT")
    user = "\n\n".join([
        _section("ONTOLOGY", ontology_turtle),
        _section("RULES", rules.to_text()),
        _section("DOCUMENT", doc_text),
        _section("OUTPUT INSTRUCTIONS", OUTPUT_INSTRUCTIONS),
    ])
    return Prompt(
        system=SYSTEM_PROMPT,
        user=user,
        token_estimate=math.ceil((len(SYSTEM_PROMPT) + len(user)) / 4),
    )


def repair_prompt(base: Prompt, previous_output: str, error_text: str) -> Prompt:
    repair = _section(
        "REPAIR",
        "Your previous answer could not be accepted.\n"
        f"Problems found:\n{error_text}\n\n"
        f"Previous answer:\n{previous_output}\n\n"
        "Return the complete corrected Turtle in the same format.",
    )
    user = f"{base.user}\n\n{repair}"
    return base.model_copy(update={
        "user": user,
        "token_estimate": math.ceil((len(base.system) + len(user)) / 4),
        "attempt": base.attempt + 1,
    })


def split_response(raw: str) -> tuple[str, Optional[str]]:
    """(turtle_block, comments). The first fenced block wins; otherwise text before a COMMENTS header."""
    if not raw.strip():
        raise EmptyResponse()
    fence = _FENCE.search(raw)
    if fence:
        turtle = fence.group(1).strip()
        rest = raw[fence.end():]
    else:
        header = _COMMENTS_HEADER.search(raw)
        turtle = raw[:header.start()] if header else raw
        rest = raw[header.start():] if header else ""
        stripped = turtle.strip()
        if stripped.startswith("```"):
            # unterminated fence, typically a truncated answer
            stripped = stripped.split("\n", 1)[1] if "\n" in stripped else ""
        turtle = stripped
    comments = None
    header = _COMMENTS_HEADER.search(rest)
    if header:
        comments = rest[header.end():].strip() or None
    return turtle, comments


def cost_of(reply: BackendReply, prices: PriceTable) -> CostRecord:
    return CostRecord(
        input_tokens=reply.input_tokens,
        output_tokens=reply.output_tokens,
        requests=1,
        cost=(reply.input_tokens * prices.input_per_million + reply.output_tokens * prices.output_per_million) / MILLION,
    )


def estimate_cost(records: Iterable[CostRecord], prices: PriceTable) -> Decimal:
    """Token totals priced with `prices`; recorded `cost` fields are ignored so prices can be changed afterwards."""
    total = Decimal(0)
    for record in records:
        total += (record.input_tokens * prices.input_per_million + record.output_tokens * prices.output_per_million) / MILLION
    return total


async def run_extraction(
    doc: DocumentRecord,
    backend: GenerationBackend,
    ontology: Ontology,
    config: ExtractionConfig,
) -> ExtractionOutcome:
    log = logger.bind(doc_id=doc.id)
    base = assemble_prompt(ontology_prompt_text(ontology, config.granularity), config.rules, doc.text)
    base = base.model_copy(update={"doc_id": doc.id})
    if base.token_estimate > config.max_prompt_tokens:
        error = OversizedPrompt(base.token_estimate, config.max_prompt_tokens)
        log.error("prompt_oversized", estimate=base.token_estimate, limit=config.max_prompt_tokens)
        return ExtractionOutcome(doc_id=doc.id, status=ExtractionStatus.BACKEND_FAILED, error=error.detail)

    prompt = base
    attempts: list[Attempt] = []
    cost = CostRecord()
    status = ExtractionStatus.PARSE_FAILED
    graph = None
    comments = None
    error = None
    for number in range(1, config.max_retries + 2):
        try:
            reply = await backend.send(prompt)
        except BackendError as exc:
            log.error("backend_failed", attempt=number, error=exc.detail)
            attempts.append(Attempt(error=exc.detail))
            status, graph, error = ExtractionStatus.BACKEND_FAILED, None, exc.detail
            break
        cost = cost + cost_of(reply, config.prices)
        attempt = Attempt(raw_response=reply.text)
        attempts.append(attempt)
        try:
            block, attempt_comments = split_response(reply.text)
            parsed = parse_turtle(block, source=f"{doc.id}.attempt{number}")
            if not len(parsed.graph):
                raise ParseError(1, 1, "the Turtle block contains no triples")
        except EmptyResponse as exc:
            attempt.parse_error = ParseErrorInfo(line=1, column=1, message=exc.detail)
        except ParseError as exc:
            attempt.parse_error = ParseErrorInfo.from_error(exc)
        except Exception as exc:
            log.exception("parse_crashed", attempt=number)
            attempt.parse_error = ParseErrorInfo(line=1, column=1, message=f"unreadable response: {exc!r}")
        else:
            report = validate_graph(parsed.graph, ontology, config.validation_mode)
            attempt.report = report
            graph, comments = parsed.graph, attempt_comments
            if report.is_valid:
                status = ExtractionStatus.VALID
                log.info("extraction_valid", attempt=number, triples=len(parsed.graph))
                break
            status = ExtractionStatus.INVALID
            problems = "\n".join(v.to_text() for v in report.errors)
        if attempt.parse_error is not None:
            status, graph = ExtractionStatus.PARSE_FAILED, None
            problems = f"PARSE ERROR at {attempt.parse_error.to_text()}"
        log.info("extraction_rejected", attempt=number, status=status.value)
        if number <= config.max_retries:
            prompt = repair_prompt(base.model_copy(update={"attempt": number}), reply.text, problems)

    return ExtractionOutcome(
        doc_id=doc.id,
        status=status,
        attempts=attempts,
        graph=graph,
        comments=comments if graph is not None else None,
        cost=cost,
        error=error,
    )
