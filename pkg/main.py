# file: main.py

from pathlib import Path
from typing import Optional

import typer
from dotenv import load_dotenv

from app.controllers import extraction, graphs, ontology, stats
from app.controllers.common import CliContext
from app.utils.logging import configure_logging

load_dotenv()

app = typer.Typer(
    name="lexkg",
    help="Build, validate and analyse knowledge graphs extracted from criminal court decisions.",
    no_args_is_help=True,
    pretty_exceptions_enable=False,
)


@app.callback()
def main(
    ctx: typer.Context,
    config: Optional[Path] = typer.Option(None, "--config", help="JSON file with setting overrides."),
    ontology_path: Optional[Path] = typer.Option(None, "--ontology", help="Ontology Turtle file (default: built-in)."),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging on stderr."),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="Only warnings and errors on stderr."),
):
    configure_logging(verbose=verbose, quiet=quiet)
    ctx.obj = CliContext(config_path=config, ontology_path=ontology_path)


# Register command groups from the controllers directory
app.add_typer(ontology.router, name="ontology")
app.add_typer(stats.router, name="stats")
app.add_typer(graphs.export_router, name="export")
app.command("extract")(extraction.extract)
app.command("cost")(extraction.cost)
app.command("validate")(graphs.validate)
app.command("merge")(graphs.merge)
app.command("query")(graphs.query)


if __name__ == "__main__":
    app()
