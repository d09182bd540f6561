# file: controllers/common.py

import functools
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import structlog
import typer
from rich.console import Console

from app.models.ontology import Ontology
from app.services.ontology_service import builtin_criminal_ontology, load_ontology_file
from app.utils.errors import EXIT_IO, LexKGError
from app.utils.settings import Settings, load_settings

logger = structlog.get_logger(__name__)

console = Console()
err_console = Console(stderr=True)


@dataclass
class CliContext:
    config_path: Optional[Path] = None
    ontology_path: Optional[Path] = None


def handle_errors(func):
    """Turns expected failures into a one-line message on stderr and the matching exit code."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except LexKGError as exc:
            err_console.print(f"error: {exc.detail}", markup=False, highlight=False, soft_wrap=True)
            raise typer.Exit(exc.exit_code)
        except OSError as exc:
            err_console.print(f"error: {exc}", markup=False, highlight=False, soft_wrap=True)
            raise typer.Exit(EXIT_IO)

    return wrapper


def cli_context(ctx: typer.Context) -> CliContext:
    return ctx.obj if isinstance(ctx.obj, CliContext) else CliContext()


def settings_for(ctx: typer.Context, **overrides) -> Settings:
    options = cli_context(ctx)
    return load_settings(options.config_path, ontology_path=options.ontology_path, **overrides)


def active_ontology(settings: Settings) -> Ontology:
    if settings.ontology_path is None:
        return builtin_criminal_ontology()
    ontology = load_ontology_file(settings.ontology_path)
    logger.info("ontology_loaded", path=str(settings.ontology_path), classes=len(ontology.classes),
                properties=len(ontology.properties))
    return ontology

