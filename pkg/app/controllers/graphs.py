# file: controllers/graphs.py

from pathlib import Path
from typing import Optional

import structlog
import typer
from rich.table import Table

from app.controllers.common import active_ontology, console, handle_errors, settings_for
from app.services.analytics_service import bgp_match, bindings_rows, export_property_graph, write_property_graph
from app.services.corpus_service import load_graph, merge_outputs
from app.services.turtle_service import parse_triple_patterns, parse_turtle, serialize_ntriples
from app.services.validation_service import validate_graph
from app.storage.outputs import write_csv
from app.storage.run_state import write_atomic
from app.utils.errors import EXIT_VALIDATION, LexKGError, ParseError

logger = structlog.get_logger(__name__)

export_router = typer.Typer(help="Export knowledge graphs to other data models.", no_args_is_help=True)


@handle_errors
def validate(
    ctx: typer.Context,
    ttl: Path = typer.Argument(..., help="Turtle file to check against the ontology."),
    strict: bool = typer.Option(False, "--strict", help="Require explicit rdf:type on every subject."),
    json_path: Optional[Path] = typer.Option(None, "--json", help="Also write the report as JSON."),
):
    """Print every violation of the ontology; exits 0 only when there is no error."""
    settings = settings_for(ctx, validation_mode="strict" if strict else None)
    ontology = active_ontology(settings)
    try:
        document = parse_turtle(ttl.read_text(encoding="utf-8"), source=ttl.name)
    except ParseError as exc:
        raise exc.with_source(str(ttl)) from None
    report = validate_graph(document.graph, ontology, settings.validation_mode)

    if report.violations:
        typer.echo(report.to_text())
    typer.echo(
        f"{len(report.violations)} violations ({len(report.errors)} errors) "
        f"in {report.checked_triples} triples, {report.mode.value} mode"
    )
    if json_path:
        write_atomic(json_path, report.to_json() + "\n")
    if not report.is_valid:
        raise typer.Exit(EXIT_VALIDATION)


@handle_errors
def merge(
    directory: Path = typer.Argument(..., help="Output directory of an extract run."),
    out: Path = typer.Option(..., "--out", help="Merged N-Triples file."),
):
    """Union of all per-document graphs as canonical, sorted N-Triples."""
    if not directory.is_dir():
        raise NotADirectoryError(f"{directory} is not a directory")
    graph = merge_outputs(directory)
    write_atomic(out, serialize_ntriples(graph))
    console.print(f"{len(graph)} triples written to {out}", markup=False, highlight=False, soft_wrap=True)


@handle_errors
def query(
    patterns_file: Path = typer.Argument(..., help="Triple patterns in Turtle syntax with ?variables."),
    graph_file: Path = typer.Argument(..., help="N-Triples or Turtle file, or an output directory."),
    csv_path: Optional[Path] = typer.Option(None, "--csv", help="Also write the bindings as CSV."),
):
    """Answer a basic graph pattern; one row per distinct solution."""
    patterns = parse_triple_patterns(patterns_file.read_text(encoding="utf-8"))
    if not patterns:
        raise LexKGError(f"{patterns_file} contains no triple patterns")
    graph = load_graph(graph_file)
    bindings = bgp_match(graph, patterns)
    names, rows = bindings_rows(bindings)

    table = Table(title=f"{len(rows)} solution(s)")
    for name in names:
        table.add_column(f"?{name}")
    for row in rows:
        table.add_row(*(row[name] for name in names))
    console.print(table)
    if csv_path:
        write_csv(csv_path, names, rows)


@export_router.command("pg")
@handle_errors
def export_pg(
    ctx: typer.Context,
    graph_file: Path = typer.Argument(..., help="Merged N-Triples file (or an output directory)."),
    out: Path = typer.Option(..., "--out", help="Directory for nodes.csv and edges.csv."),
):
    """Property-graph tables: one row per node with its literal attributes, one row per edge."""
    ontology = active_ontology(settings_for(ctx))
    tables = export_property_graph(load_graph(graph_file), ontology)
    nodes, edges = write_property_graph(out, tables)
    logger.info("property_graph_exported", nodes=len(tables.nodes), edges=len(tables.edges), out=str(out))
    console.print(
        f"{len(tables.nodes)} nodes -> {nodes}, {len(tables.edges)} edges -> {edges}",
        markup=False,
        highlight=False,
        soft_wrap=True,
    )
