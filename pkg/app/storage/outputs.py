# file: storage/outputs.py

import csv
import io
import json
from pathlib import Path
from typing import Optional

from app.models.extraction import ExtractionOutcome, ExtractionStatus
from app.services.turtle_service import TurtleDocument, serialize_turtle
from app.storage.run_state import write_atomic

TTL_SUFFIX = ".ttl"
REPORT_SUFFIX = ".report.json"
COMMENTS_SUFFIX = ".comments.txt"


def document_paths(output_dir: Path, doc_id: str) -> dict[str, Path]:
    output_dir = Path(output_dir)
    return {
        "ttl": output_dir / f"{doc_id}{TTL_SUFFIX}",
        "report": output_dir / f"{doc_id}{REPORT_SUFFIX}",
        "comments": output_dir / f"{doc_id}{COMMENTS_SUFFIX}",
    }


def _report_json(outcome: ExtractionOutcome) -> str:
    final = outcome.final_report
    body = {
        "doc_id": outcome.doc_id,
        "status": outcome.status.value,
        "attempts": len(outcome.attempts),
        "error": outcome.error,
        "parse_errors": [a.parse_error.model_dump() for a in outcome.attempts if a.parse_error],
        "cost": outcome.cost.model_dump(mode="json"),
        "report": final.to_dict() if final else None,
    }
    return json.dumps(body, indent=2, ensure_ascii=False) + "\n"


def write_outcome(output_dir: Path, outcome: ExtractionOutcome, keep_invalid: bool = True) -> list[Path]:
    """Writes the graph (valid, or invalid when kept), the report and any comments; returns written paths."""
    paths = document_paths(output_dir, outcome.doc_id)
    written = []
    keep_graph = outcome.graph is not None and (
        outcome.status == ExtractionStatus.VALID
        or (outcome.status == ExtractionStatus.INVALID and keep_invalid)
    )
    if keep_graph:
        graph = outcome.graph
        write_atomic(paths["ttl"], serialize_turtle(TurtleDocument(graph, graph.prefixes)))
        written.append(paths["ttl"])
    elif paths["ttl"].exists():
        paths["ttl"].unlink()
    write_atomic(paths["report"], _report_json(outcome))
    written.append(paths["report"])
    if outcome.comments:
        write_atomic(paths["comments"], outcome.comments.rstrip("\n") + "\n")
        written.append(paths["comments"])
    return written


def graph_files(output_dir: Path) -> list[Path]:
    return sorted(p for p in Path(output_dir).glob(f"*{TTL_SUFFIX}") if p.is_file())


def doc_id_of(path: Path) -> Optional[str]:
    name = Path(path).name
    return name[: -len(TTL_SUFFIX)] if name.endswith(TTL_SUFFIX) else None


def csv_text(fieldnames: list[str], rows: list[dict]) -> str:
    output = io.StringIO()
    writer = csv.DictWriter(output, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return output.getvalue()


def write_csv(path: Path, fieldnames: list[str], rows: list[dict]) -> Path:
    write_atomic(path, csv_text(fieldnames, rows))
    return Path(path)
