# file: storage/run_state.py

import hashlib
import os
import tempfile
from pathlib import Path
from typing import Optional

import structlog
from pydantic import ValidationError

from app.models.corpus import RunState
from app.utils.errors import EXIT_IO, LexKGError, StateFingerprintMismatch

logger = structlog.get_logger(__name__)


class CorruptState(LexKGError):
    exit_code = EXIT_IO


def config_fingerprint(ontology_bytes: bytes, rules_bytes: bytes, model_id: str) -> str:
    digest = hashlib.sha256()
    for part in (ontology_bytes, rules_bytes, model_id.encode("utf-8")):
        digest.update(len(part).to_bytes(8, "big"))
        digest.update(part)
    return digest.hexdigest()


def write_atomic(path: Path, text: str) -> None:
    """Temp file in the target directory, fsync, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def save_state(state: RunState, path: Path) -> None:
    write_atomic(path, state.model_dump_json(indent=2) + "\n")


def load_state(path: Path) -> Optional[RunState]:
    path = Path(path)
    if not path.exists():
        return None
    try:
        return RunState.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as exc:
        raise CorruptState(f"Run state {path} is not a valid snapshot: {exc.error_count()} problems") from None


def open_state(path: Path, fingerprint: str) -> RunState:
    """Existing state with a matching fingerprint, or a fresh one."""
    state = load_state(path)
    if state is None:
        return RunState(fingerprint=fingerprint)
    if state.fingerprint != fingerprint:
        raise StateFingerprintMismatch(fingerprint, state.fingerprint)
    logger.info("run_resumed", state=str(path), **{k: v for k, v in state.totals.items() if v})
    return state
