# file: models/extraction.py

from decimal import Decimal
from enum import Enum
from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, InstanceOf, field_validator

from app.models.validation import ValidationMode, ValidationReport
from app.services.graph_store import Graph
from app.utils.errors import ParseError


class GuidanceRules(BaseModel):
    rules: List[str]

    @field_validator("rules")
    @classmethod
    def single_sentences(cls, rules: List[str]) -> List[str]:
        for rule in rules:
            if not rule.strip() or "\n" in rule:
                raise ValueError(f"each rule must be one non-empty line, got {rule!r}")
        return rules

    @classmethod
    def from_text(cls, text: str) -> "GuidanceRules":
        lines = [line.strip() for line in text.splitlines()]
        return cls(rules=[line for line in lines if line and not line.startswith("#")])

    @classmethod
    def from_file(cls, path: Path) -> "GuidanceRules":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def to_text(self) -> str:
        return "\n".join(f"{i}. {rule}" for i, rule in enumerate(self.rules, start=1))


class Prompt(BaseModel):
    system: str
    user: str
    token_estimate: int
    doc_id: Optional[str] = None
    attempt: int = 1


class BackendConfig(BaseModel):
    endpoint: str
    model: str
    temperature: float = Field(0.0, ge=0)
    max_output_tokens: int = Field(4096, ge=1)
    timeout: float = Field(120.0, gt=0)
    api_key_env: str = "LEXKG_API_KEY"
    transport_retries: int = Field(2, ge=0)
    retry_backoff: float = Field(1.0, ge=0)


class BackendReply(BaseModel):
    text: str
    input_tokens: int = Field(ge=0)
    output_tokens: int = Field(ge=0)


class PriceTable(BaseModel):
    """USD per one million tokens."""

    input_per_million: Decimal = Field(Decimal("0.15"), ge=0)
    output_per_million: Decimal = Field(Decimal("0.60"), ge=0)


class CostRecord(BaseModel):
    input_tokens: int = Field(0, ge=0)
    output_tokens: int = Field(0, ge=0)
    requests: int = Field(0, ge=0)
    cost: Decimal = Field(Decimal("0"), ge=0)

    def __add__(self, other: "CostRecord") -> "CostRecord":
        return CostRecord(
            input_tokens=self.input_tokens + other.input_tokens,
            output_tokens=self.output_tokens + other.output_tokens,
            requests=self.requests + other.requests,
            cost=self.cost + other.cost,
        )


class ExtractionStatus(str, Enum):
    VALID = "valid"
    INVALID = "invalid"
    PARSE_FAILED = "parse_failed"
    BACKEND_FAILED = "backend_failed"


class ParseErrorInfo(BaseModel):
    line: int
    column: int
    message: str
    snippet: str = ""

    @classmethod
    def from_error(cls, error: ParseError) -> "ParseErrorInfo":
        return cls(line=error.line, column=error.column, message=error.message, snippet=error.snippet)

    def to_text(self) -> str:
        text = f"{self.line}:{self.column}: {self.message}"
        return f"{text} near {self.snippet!r}" if self.snippet else text


class Attempt(BaseModel):
    raw_response: str = ""
    parse_error: Optional[ParseErrorInfo] = None
    report: Optional[ValidationReport] = None
    error: Optional[str] = None


class ExtractionConfig(BaseModel):
    rules: GuidanceRules
    granularity: str = "full"
    max_retries: int = Field(2, ge=0)
    validation_mode: ValidationMode = ValidationMode.LENIENT
    max_prompt_tokens: int = Field(100_000, ge=1)
    prices: PriceTable = PriceTable()


class ExtractionOutcome(BaseModel):
    doc_id: str
    status: ExtractionStatus
    attempts: List[Attempt] = []
    graph: Optional[InstanceOf[Graph]] = Field(None, exclude=True)
    comments: Optional[str] = None
    cost: CostRecord = CostRecord()
    error: Optional[str] = None

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @property
    def final_report(self) -> Optional[ValidationReport]:
        return self.attempts[-1].report if self.attempts else None
