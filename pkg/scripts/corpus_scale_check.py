# file: scripts/corpus_scale_check.py

import os
import sys
from pathlib import Path
from typing import Optional

import typer
from rich.console import Console
from rich.table import Table

# Add the project root to the Python path so the 'app' package resolves when run as a script.
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from app.models.rdf import Iri, Literal, Term, fca
from app.services.analytics_service import FROM_DOCUMENT, count_by_object, triples_per_doc
from app.services.corpus_service import load_graph
from app.services.graph_store import Graph
from app.services.ontology_service import builtin_criminal_ontology
from app.utils.logging import configure_logging

REFERENCE_DOCUMENTS = 2820
REFERENCE_MEAN_TRIPLES = 30
MEAN_TOLERANCE = 5
EXPECTED_TOP_CATEGORY = fca("ViolentOffense")

console = Console()


def _mean_triples_by_provenance(graph: Graph) -> tuple[int, float]:
    """(documents, mean triples per document) using the fromDocument tags of a merged graph."""
    per_doc: dict[str, int] = {}
    for subject, doc in ((t.subject, t.object) for t in graph.match(None, FROM_DOCUMENT, None)):
        if not isinstance(doc, Literal):
            continue
        own = sum(1 for t in graph.match(subject) if t.predicate != FROM_DOCUMENT)
        per_doc[doc.lexical] = per_doc.get(doc.lexical, 0) + own
    if not per_doc:
        return 0, 0.0
    return len(per_doc), sum(per_doc.values()) / len(per_doc)


def dataset_figures(path: Path) -> dict:
    ontology = builtin_criminal_ontology()
    graph = load_graph(path)
    if path.is_dir():
        summary = triples_per_doc(path)
        documents, mean = len(summary.counts), summary.mean
    else:
        documents, mean = _mean_triples_by_provenance(graph)
    ranking = list(count_by_object(graph, ontology))
    return {"documents": documents, "mean_triples": mean, "top_category": ranking[0] if ranking else None}


def evaluate(documents: int, mean_triples: float, top_category: Optional[Term]) -> list[tuple[str, str, str, bool]]:
    """(check, expected, measured, passed) rows."""
    top = top_category.local_name() if isinstance(top_category, Iri) else str(top_category)
    return [
        ("documents processed", str(REFERENCE_DOCUMENTS), str(documents), documents == REFERENCE_DOCUMENTS),
        (
            "mean triples per appeal",
            f"{REFERENCE_MEAN_TRIPLES} ± {MEAN_TOLERANCE}",
            f"{mean_triples:.1f}",
            abs(mean_triples - REFERENCE_MEAN_TRIPLES) <= MEAN_TOLERANCE,
        ),
        (
            "most frequent offense",
            EXPECTED_TOP_CATEGORY.local_name(),
            top,
            top_category == EXPECTED_TOP_CATEGORY,
        ),
    ]


def main(dataset: Path = typer.Argument(..., help="Output directory of a full extract run, or its merged .nt file.")):
    """Compare a full-corpus run with the reference corpus figures."""
    configure_logging(quiet=True)
    figures = dataset_figures(dataset)
    rows = evaluate(figures["documents"], figures["mean_triples"], figures["top_category"])

    table = Table(title=f"Corpus-scale check: {dataset}")
    for column in ("check", "expected", "measured", "result"):
        table.add_column(column)
    for check, expected, measured, passed in rows:
        table.add_row(check, expected, measured, "[green]pass[/green]" if passed else "[red]FAIL[/red]")
    console.print(table)
    if not all(row[3] for row in rows):
        raise typer.Exit(1)


if __name__ == "__main__":
    typer.run(main)
