# file: services/backends.py

import math
import os
import re
from pathlib import Path
from typing import Optional, Protocol, Union

import httpx
import structlog
from tenacity import AsyncRetrying, RetryError, retry_if_exception_type, stop_after_attempt, wait_exponential

from app.models.extraction import BackendConfig, BackendReply, Prompt
from app.utils.errors import BackendError

logger = structlog.get_logger(__name__)


class GenerationBackend(Protocol):
    """send(prompt) -> reply text and token usage; raises BackendError on transport failure."""

    async def send(self, prompt: Prompt) -> BackendReply: ...


class _Transient(Exception):
    pass


class HttpBackend:
    """Chat-completions endpoint. Safe for concurrent use; one short-lived client per request."""

    def __init__(self, config: BackendConfig, transport: Optional[httpx.AsyncBaseTransport] = None):
        self.config = config
        self._transport = transport
        self._api_key = os.getenv(config.api_key_env)
        if not self._api_key:
            raise BackendError(f"Environment variable {config.api_key_env} is not set")

    def _payload(self, prompt: Prompt) -> dict:
        return {
            "model": self.config.model,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_output_tokens,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
        }

    async def _post(self, client: httpx.AsyncClient, prompt: Prompt) -> dict:
        try:
            response = await client.post(
                self.config.endpoint,
                json=self._payload(prompt),
                headers={"Authorization": f"Bearer {self._api_key}"},
            )
        except httpx.TransportError as exc:
            raise _Transient(f"{type(exc).__name__}: {exc}") from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise _Transient(f"HTTP {response.status_code}")
        if response.status_code >= 400:
            raise BackendError(f"Backend rejected the request: HTTP {response.status_code} {response.text[:200]}")
        try:
            return response.json()
        except ValueError:
            raise BackendError("Backend answered with a non-JSON body") from None

    async def send(self, prompt: Prompt) -> BackendReply:
        log = logger.bind(doc_id=prompt.doc_id, attempt=prompt.attempt, model=self.config.model)
        retrying = AsyncRetrying(
            stop=stop_after_attempt(1 + self.config.transport_retries),
            wait=wait_exponential(multiplier=self.config.retry_backoff, min=self.config.retry_backoff, max=60),
            retry=retry_if_exception_type(_Transient),
        )
        async with httpx.AsyncClient(timeout=self.config.timeout, transport=self._transport) as client:
            try:
                async for attempt in retrying:
                    with attempt:
                        if attempt.retry_state.attempt_number > 1:
                            log.warning("backend_retry", try_number=attempt.retry_state.attempt_number)
                        data = await self._post(client, prompt)
            except RetryError as exc:
                cause = exc.last_attempt.exception()
                log.error("backend_unreachable", error=str(cause))
                raise BackendError(f"Backend unreachable after {1 + self.config.transport_retries} tries: {cause}") from None

        try:
            text = data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError):
            raise BackendError("Backend response has no text candidate") from None
        usage = data.get("usage") or {}
        reply = BackendReply(
            text=text,
            input_tokens=int(usage.get("prompt_tokens", prompt.token_estimate)),
            output_tokens=int(usage.get("completion_tokens", math.ceil(len(text) / 4))),
        )
        log.debug("backend_reply", input_tokens=reply.input_tokens, output_tokens=reply.output_tokens)
        return reply


class MockBackend:
    """Replays `<doc_id>.attempt<N>.txt` files; counts calls so tests can check resume behaviour."""

    def __init__(self, fixture_dir: Union[str, Path]):
        self.fixture_dir = Path(fixture_dir)
        self.calls = 0
        self.calls_by_doc: dict[str, int] = {}

    def _available(self, doc_id: str) -> dict[int, Path]:
        pattern = re.compile(rf"^{re.escape(doc_id)}\.attempt(\d+)\.txt$")
        found = {}
        if self.fixture_dir.is_dir():
            for path in self.fixture_dir.iterdir():
                m = pattern.match(path.name)
                if m:
                    found[int(m.group(1))] = path
        return found

    async def send(self, prompt: Prompt) -> BackendReply:
        if prompt.doc_id is None:
            raise BackendError("Mock backend needs the document id on the prompt")
        self.calls += 1
        self.calls_by_doc[prompt.doc_id] = self.calls_by_doc.get(prompt.doc_id, 0) + 1
        available = self._available(prompt.doc_id)
        if not available:
            raise BackendError(f"No mock response for document '{prompt.doc_id}' in {self.fixture_dir}")
        path = available.get(prompt.attempt) or available[max(available)]
        text = path.read_text(encoding="utf-8")
        return BackendReply(
            text=text,
            input_tokens=prompt.token_estimate,
            output_tokens=math.ceil(len(text) / 4),
        )
