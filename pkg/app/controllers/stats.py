# file: controllers/stats.py

from pathlib import Path
from typing import Optional

import typer
from rich.table import Table

from app.controllers.common import active_ontology, console, err_console, handle_errors, settings_for
from app.models.analytics import Histogram
from app.models.rdf import Iri
from app.services.analytics_service import (
    AMOUNT_EUR,
    DURATION_DAYS,
    count_by_object,
    grouped_distribution,
    triples_per_doc,
    write_histogram_csv,
    write_plot_data,
)
from app.services.corpus_service import load_graph
from app.services.graph_store import canonical_term
from app.storage.outputs import write_csv

router = typer.Typer(help="Corpus statistics over extracted graphs.", no_args_is_help=True)


def _histogram_table(title: str, hist: Histogram) -> Table:
    table = Table(title=title)
    table.add_column("bin")
    table.add_column("count", justify="right")
    table.add_column("fraction", justify="right")
    fractions = hist.normalized or [0.0] * len(hist.counts)
    for i, count in enumerate(hist.counts):
        table.add_row(f"[{hist.bin_edges[i]:g}, {hist.bin_edges[i + 1]:g})", str(count), f"{fractions[i]:.3f}")
    return table


@router.command("triples")
@handle_errors
def triples(
    directory: Path = typer.Argument(..., help="Output directory of an extract run."),
    bin_width: float = typer.Option(5, "--bin-width", min=0.001),
    csv_path: Optional[Path] = typer.Option(None, "--csv", help="Also write the numbers as CSV."),
    plot_data: Optional[Path] = typer.Option(None, "--plot-data", help="JSON file for external plotting."),
):
    """Distribution of the number of triples per document."""
    result = triples_per_doc(directory, bin_width=bin_width)
    console.print(_histogram_table(f"Triples per document ({len(result.counts)} documents)", result.histogram))
    console.print(f"mean {result.mean:.2f}, median {result.median:g}", markup=False, highlight=False, soft_wrap=True)
    if csv_path:
        write_histogram_csv(csv_path, {"all": result.histogram})
    if plot_data:
        write_plot_data(plot_data, result.model_dump())


@router.command("offenses")
@handle_errors
def offenses(
    ctx: typer.Context,
    source: Path = typer.Argument(..., help="Output directory or merged .nt file."),
    csv_path: Optional[Path] = typer.Option(None, "--csv", help="Also write the numbers as CSV."),
    plot_data: Optional[Path] = typer.Option(None, "--plot-data", help="JSON file for external plotting."),
):
    """Number of crimes per offense category, most frequent first."""
    ontology = active_ontology(settings_for(ctx))
    counts = count_by_object(load_graph(source), ontology)
    total = sum(counts.values())
    rows = [
        {"category": term.local_name() if isinstance(term, Iri) else canonical_term(term), "count": count}
        for term, count in counts.items()
    ]

    table = Table(title=f"Offense categories ({total} crimes)")
    table.add_column("category")
    table.add_column("count", justify="right")
    table.add_column("share", justify="right")
    for row in rows:
        table.add_row(row["category"], str(row["count"]), f"{row['count'] / total:.1%}")
    console.print(table)
    if csv_path:
        write_csv(csv_path, ["category", "count"], rows)
    if plot_data:
        write_plot_data(plot_data, {"counts": {row["category"]: row["count"] for row in rows}})


def _grouped(source: Path, predicate: Iri, title: str, bin_width, csv_path, plot_data) -> None:
    result = grouped_distribution(load_graph(source), predicate, bin_width=bin_width)
    for warning in result.warnings:
        err_console.print(f"warning: {warning}", markup=False, highlight=False, soft_wrap=True)

    table = Table(title=title)
    for column in ("decision", "n", "mean", "median", "q1", "q3", "min", "max"):
        table.add_column(column, justify="left" if column == "decision" else "right")
    for label, group in result.groups.items():
        s = group.summary
        table.add_row(label, str(s.n), *(f"{v:g}" for v in (s.mean, s.median, s.q1, s.q3, s.min, s.max)))
    console.print(table)
    for label, group in result.groups.items():
        console.print(_histogram_table(label, group.histogram))
    if result.ks_statistic is not None:
        first, second = result.compared
        console.print(
            f"KS statistic {first} vs {second}: {result.ks_statistic:.4f}", markup=False, highlight=False, soft_wrap=True
        )

    if csv_path:
        write_histogram_csv(csv_path, {label: group.histogram for label, group in result.groups.items()})
    if plot_data:
        write_plot_data(plot_data, result.model_dump())


@router.command("duration")
@handle_errors
def duration(
    source: Path = typer.Argument(..., help="Output directory or merged .nt file."),
    bin_width: Optional[float] = typer.Option(None, "--bin-width", min=0.001, help="Days per bin (default 90)."),
    csv_path: Optional[Path] = typer.Option(None, "--csv", help="Also write the numbers as CSV."),
    plot_data: Optional[Path] = typer.Option(None, "--plot-data", help="JSON file for external plotting."),
):
    """Custodial punishment length in days, per appeal decision."""
    _grouped(source, DURATION_DAYS, "Custodial punishment (days)", bin_width, csv_path, plot_data)


@router.command("fines")
@handle_errors
def fines(
    source: Path = typer.Argument(..., help="Output directory or merged .nt file."),
    bin_width: Optional[float] = typer.Option(None, "--bin-width", min=0.001, help="Euros per bin (default: decades)."),
    csv_path: Optional[Path] = typer.Option(None, "--csv", help="Also write the numbers as CSV."),
    plot_data: Optional[Path] = typer.Option(None, "--plot-data", help="JSON file for external plotting."),
):
    """Monetary punishment in euros, per appeal decision."""
    _grouped(source, AMOUNT_EUR, "Monetary punishment (EUR)", bin_width, csv_path, plot_data)
