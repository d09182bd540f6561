# file: utils/settings.py

import json
from pathlib import Path
from typing import Any, Literal, Optional

from dotenv import load_dotenv
from pydantic import Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.utils.errors import LexKGError

load_dotenv()


class Settings(BaseSettings):
    """Pipeline configuration. Precedence: flags > --config JSON > LEXKG_* environment > defaults."""

    ontology_path: Optional[Path] = None
    guidance_rules_path: Optional[Path] = None
    ontology_granularity: Literal["full", "compact"] = "full"

    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-4o-mini"
    temperature: float = Field(0.0, ge=0)
    max_output_tokens: int = Field(4096, ge=1)
    timeout: float = Field(120.0, gt=0)
    api_key_env: str = "LEXKG_API_KEY"
    transport_retries: int = Field(2, ge=0)
    retry_backoff: float = Field(1.0, ge=0)

    max_inflight: int = Field(4, ge=1)
    max_retries: int = Field(2, ge=0)
    keep_invalid: bool = True
    validation_mode: Literal["strict", "lenient"] = "lenient"
    max_prompt_tokens: int = Field(100_000, ge=1)

    price_input_per_million: float = Field(0.15, ge=0)
    price_output_per_million: float = Field(0.60, ge=0)

    model_config = SettingsConfigDict(env_prefix="LEXKG_", extra="ignore")


class ConfigError(LexKGError):
    pass


def load_settings(config_path: Optional[Path] = None, **overrides: Any) -> Settings:
    """Builds Settings from an optional JSON file plus flag overrides (None means "not given")."""
    values: dict[str, Any] = {}
    if config_path is not None:
        try:
            data = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"Config file {config_path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"Config file {config_path} must hold a JSON object, got {type(data).__name__}")
        values.update(data)
    values.update({key: value for key, value in overrides.items() if value is not None})
    try:
        return Settings(**values)
    except ValidationError as exc:
        problems = "; ".join(f"{'.'.join(map(str, e['loc']))}: {e['msg']}" for e in exc.errors())
        raise ConfigError(f"Invalid configuration: {problems}") from None
