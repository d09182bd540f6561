# file: models/validation.py

import json
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, InstanceOf

from app.models.rdf import Triple
from app.services.graph_store import canonical_ntriple, canonical_term


class Rule(str, Enum):
    UNKNOWN_PREDICATE = "UnknownPredicate"
    BAD_LITERAL = "BadLiteral"
    DOMAIN_MISMATCH = "DomainMismatch"
    RANGE_MISMATCH = "RangeMismatch"
    UNTYPED_SUBJECT = "UntypedSubject"


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


class ValidationMode(str, Enum):
    STRICT = "strict"
    LENIENT = "lenient"


class Violation(BaseModel):
    rule: Rule
    triple: Optional[InstanceOf[Triple]] = None
    severity: Severity = Severity.ERROR
    message: str

    model_config = ConfigDict(frozen=True)

    def sort_key(self) -> tuple:
        return (canonical_ntriple(self.triple) if self.triple else "", self.rule.value, self.message)

    def to_text(self) -> str:
        where = canonical_ntriple(self.triple) if self.triple else "<no triple>"
        return f"{self.rule.value} at {where}: {self.message}"

    def to_dict(self) -> dict:
        return {
            "rule": self.rule.value,
            "severity": self.severity.value,
            "subject": canonical_term(self.triple.subject) if self.triple else None,
            "predicate": canonical_term(self.triple.predicate) if self.triple else None,
            "object": canonical_term(self.triple.object) if self.triple else None,
            "message": self.message,
        }


class ValidationReport(BaseModel):
    violations: List[Violation] = []
    checked_triples: int = 0
    mode: ValidationMode = ValidationMode.LENIENT

    @property
    def errors(self) -> List[Violation]:
        return [v for v in self.violations if v.severity == Severity.ERROR]

    @property
    def is_valid(self) -> bool:
        return not self.errors

    def to_text(self) -> str:
        return "\n".join(v.to_text() for v in self.violations)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "checked_triples": self.checked_triples,
            "valid": self.is_valid,
            "violations": [v.to_dict() for v in self.violations],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)
