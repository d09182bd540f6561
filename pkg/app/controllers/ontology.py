# file: controllers/ontology.py

from pathlib import Path
from typing import Optional

import typer
from rich.table import Table

from app.controllers.common import active_ontology, console, err_console, handle_errors, settings_for
from app.services.generation_service import RULES_PATH
from app.services.ontology_service import self_check, vocabulary_table
from app.storage.outputs import write_csv
from app.utils.errors import EXIT_VALIDATION

router = typer.Typer(help="Inspect and check the ontology used for extraction and validation.", no_args_is_help=True)

VOCABULARY_FIELDS = ["kind", "term", "label", "domain", "range"]


@router.command("show")
@handle_errors
def show(
    ctx: typer.Context,
    csv_path: Optional[Path] = typer.Option(None, "--csv", help="Also write the table as CSV."),
):
    """Print the vocabulary table: classes, properties, individuals and whitelisted predicates."""
    ontology = active_ontology(settings_for(ctx))
    rows = vocabulary_table(ontology)

    table = Table(title=f"Ontology vocabulary ({len(rows)} terms)")
    for field in VOCABULARY_FIELDS:
        table.add_column(field)
    for row in rows:
        table.add_row(row.kind, row.term, row.label or "", row.domain or "", row.range or "")
    console.print(table)

    if csv_path:
        write_csv(csv_path, VOCABULARY_FIELDS, [row.model_dump() for row in rows])


@router.command("check")
@handle_errors
def check(ctx: typer.Context):
    """Self-validate the ontology file; exits 1 when a problem is found."""
    settings = settings_for(ctx)
    ontology = active_ontology(settings)
    rules_path = settings.guidance_rules_path or RULES_PATH
    problems = self_check(ontology, rules_path.read_text(encoding="utf-8"))

    for warning in ontology.warnings:
        err_console.print(f"warning: {warning}", markup=False, highlight=False, soft_wrap=True)
    for problem in problems:
        typer.echo(problem)
    typer.echo(f"{len(problems)} problem(s) in {len(ontology.classes)} classes and {len(ontology.properties)} properties")
    if problems:
        raise typer.Exit(EXIT_VALIDATION)
