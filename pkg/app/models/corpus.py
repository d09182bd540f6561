# file: models/corpus.py

import datetime as dt
from datetime import datetime, timezone
from decimal import Decimal
from enum import Enum
from pathlib import Path
from typing import Dict, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from app.models.extraction import CostRecord
from app.utils.errors import InvalidTransition


class DocumentRecord(BaseModel):
    id: str
    text: str
    date: Optional[dt.date] = None
    source_path: Optional[str] = None

    @field_validator("id")
    @classmethod
    def usable_as_file_name(cls, value: str) -> str:
        if not value or value in (".", "..") or "/" in value or "\\" in value or "\x00" in value:
            raise ValueError(f"document id {value!r} cannot be used as a file name")
        return value

    @field_validator("text")
    @classmethod
    def not_blank(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("document text is empty")
        return value


class DocStatus(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    VALID = "valid"
    INVALID = "invalid"
    PARSE_FAILED = "parse_failed"
    BACKEND_FAILED = "backend_failed"

    @property
    def terminal(self) -> bool:
        return self not in (DocStatus.PENDING, DocStatus.RUNNING)


class DocState(BaseModel):
    status: DocStatus = DocStatus.PENDING
    attempts: int = 0
    error: Optional[str] = None
    cost: CostRecord = CostRecord()


def _now() -> datetime:
    return datetime.now(timezone.utc)


class RunState(BaseModel):
    fingerprint: str
    docs: Dict[str, DocState] = {}
    totals: Dict[str, int] = {}
    started_at: datetime = Field(default_factory=_now)
    updated_at: datetime = Field(default_factory=_now)

    @model_validator(mode="after")
    def count_statuses(self) -> "RunState":
        self._recount()
        return self

    def add_pending(self, doc_id: str) -> None:
        self.docs.setdefault(doc_id, DocState())
        self._recount()

    def transition(self, doc_id: str, new: DocStatus, **details) -> DocState:
        """Moves a document forward; a crashed `running` document may be started again."""
        current = self.docs.setdefault(doc_id, DocState())
        allowed = (
            (current.status == DocStatus.PENDING and new == DocStatus.RUNNING)
            or (current.status == DocStatus.RUNNING and (new.terminal or new == DocStatus.RUNNING))
        )
        if not allowed:
            raise InvalidTransition(doc_id, current.status.value, new.value)
        updated = current.model_copy(update={"status": new, **details})
        self.docs[doc_id] = updated
        self.updated_at = _now()
        self._recount()
        return updated

    def _recount(self) -> None:
        counts = {status.value: 0 for status in DocStatus}
        for state in self.docs.values():
            counts[state.status.value] += 1
        counts["documents"] = len(self.docs)
        self.totals = counts

    def pending_ids(self) -> list[str]:
        return [doc_id for doc_id, state in self.docs.items() if not state.status.terminal]

    def cost_records(self) -> list[CostRecord]:
        return [state.cost for state in self.docs.values()]

    @property
    def total_cost(self) -> Decimal:
        return sum((state.cost.cost for state in self.docs.values()), Decimal(0))


class RunConfig(BaseModel):
    max_inflight: int = Field(4, ge=1)
    max_retries: int = Field(2, ge=0)
    keep_invalid: bool = True
    output_dir: Path
    state_path: Path


class RunSummaryRow(BaseModel):
    doc_id: str
    status: str
    attempts: int
    input_tokens: int
    output_tokens: int
    cost: Decimal
    error: str = ""
