"""Model transport: a chat-completions wire client and a scripted stand-in.

The wire protocol is the de-facto chat-completions schema: POST a JSON
document {model, messages, temperature, max_tokens} to the endpoint URL and
read the reply from the first choice's message content. Transient failures
(connection errors, 429, 5xx) are retried with exponential backoff; every
call is bounded by a timeout. Credentials never leave this module: they go
into the Authorization header only, never into traces or logs.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import httpx
import yaml

from selfai.agent.prompts import Phase

Message = dict[str, str]  # {"role": ..., "content": ...}

_VALID_ROLES = {"system", "user", "assistant"}


class EndpointError(RuntimeError):
    def __init__(self, status: int, detail: str = "") -> None:
        super().__init__(f"endpoint returned status {status}: {detail[:200]}")
        self.status = status


class ChatTimeout(RuntimeError):
    """The call exceeded its per-call timeout after all retries."""


class BudgetExceeded(RuntimeError):
    """The endpoint rejected the request for exceeding its token budget."""


class PlaybookError(AssertionError):
    """Scripted transport got a phase it did not expect, or ran dry."""


@dataclass
class ChatExchange:
    """Transport record for one call: request, response and accounting."""

    messages: list[Message]
    model: str
    temperature: float
    max_tokens: int
    response_text: str = ""
    latency_s: float = 0.0
    prompt_tokens: int | None = None
    completion_tokens: int | None = None
    attempts: int = 1

    def __post_init__(self) -> None:
        for m in self.messages:
            if m.get("role") not in _VALID_ROLES:
                raise ValueError(f"invalid message role {m.get('role')!r}")


class RateLimiter:
    """Global requests-per-minute cap shared by concurrent studies."""

    def __init__(self, requests_per_minute: float) -> None:
        self.interval = 60.0 / requests_per_minute
        self._lock = threading.Lock()
        self._next_free = 0.0

    def acquire(self) -> None:
        with self._lock:
            now = time.monotonic()
            wait = self._next_free - now
            self._next_free = max(now, self._next_free) + self.interval
        if wait > 0:
            time.sleep(wait)


class ChatClient:
    """HTTP chat client with retry, backoff, timeout and rate limiting."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str | None = None,
        *,
        temperature: float = 0.0,
        max_tokens: int = 2048,
        timeout: float = 120.0,
        max_retries: int = 3,
        backoff_base: float = 0.5,
        rate_limiter: RateLimiter | None = None,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        self.endpoint = endpoint
        self.model = model
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.rate_limiter = rate_limiter
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(headers=headers, timeout=timeout, transport=transport)
        self.last_exchange: ChatExchange | None = None

    def complete(self, messages: Sequence[Message], phase: Phase | None = None) -> str:
        """Send one chat request; returns the assistant reply text."""
        del phase  # live endpoints ignore phase; scripted transports use it
        payload = {
            "model": self.model,
            "messages": list(messages),
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }
        started = time.monotonic()
        last_error: Exception | None = None
        for attempt in range(1, self.max_retries + 1):
            if self.rate_limiter is not None:
                self.rate_limiter.acquire()
            try:
                response = self._client.post(self.endpoint, json=payload)
            except httpx.TimeoutException as exc:
                last_error = ChatTimeout(str(exc))
            except httpx.HTTPError as exc:
                last_error = EndpointError(0, str(exc))
            else:
                if response.status_code == 200:
                    text = self._extract(response)
                    self.last_exchange = ChatExchange(
                        messages=list(messages),
                        model=self.model,
                        temperature=self.temperature,
                        max_tokens=self.max_tokens,
                        response_text=text,
                        latency_s=time.monotonic() - started,
                        attempts=attempt,
                    )
                    return text
                if response.status_code in (429,) or response.status_code >= 500:
                    last_error = EndpointError(response.status_code, response.text)
                elif _looks_like_budget_error(response):
                    raise BudgetExceeded(response.text[:500])
                else:
                    raise EndpointError(response.status_code, response.text)
            if attempt < self.max_retries:
                time.sleep(self.backoff_base * 2 ** (attempt - 1))
        assert last_error is not None
        raise last_error

    @staticmethod
    def _extract(response: httpx.Response) -> str:
        try:
            body = response.json()
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, json.JSONDecodeError) as exc:
            raise EndpointError(response.status_code, f"malformed response body: {exc}")

    def close(self) -> None:
        self._client.close()


def _looks_like_budget_error(response: httpx.Response) -> bool:
    if response.status_code == 413:
        return True
    text = response.text.lower()
    return response.status_code == 400 and ("context" in text and ("length" in text or "token" in text))


@dataclass
class PlaybookEntry:
    expect_phase: Phase
    response_text: str


class ScriptedTransport:
    """Deterministic playbook-driven stand-in for a live model endpoint.

    Entries are consumed strictly in order; a phase mismatch or playbook
    exhaustion raises immediately (a test failure, never a silent fallback).
    """

    def __init__(self, entries: Sequence[PlaybookEntry]) -> None:
        self.entries = list(entries)
        self.cursor = 0
        self.last_exchange: ChatExchange | None = None

    @property
    def exhausted(self) -> bool:
        return self.cursor >= len(self.entries)

    def complete(self, messages: Sequence[Message], phase: Phase | None = None) -> str:
        if self.exhausted:
            raise PlaybookError(f"playbook exhausted after {self.cursor} entries (phase {phase})")
        entry = self.entries[self.cursor]
        if phase is not None and entry.expect_phase is not phase:
            raise PlaybookError(
                f"playbook entry {self.cursor} expects phase {entry.expect_phase.value}, got {phase.value}"
            )
        self.cursor += 1
        self.last_exchange = ChatExchange(
            messages=list(messages),
            model="scripted",
            temperature=0.0,
            max_tokens=0,
            response_text=entry.response_text,
        )
        return entry.response_text

    def close(self) -> None:
        pass


def load_playbook(path: str | Path) -> ScriptedTransport:
    """Load a playbook file: a YAML/JSON list of {expect_phase, response_text}."""
    raw = yaml.safe_load(Path(path).read_text())
    if not isinstance(raw, list) or not raw:
        raise PlaybookError(f"playbook {path} must be a nonempty list")
    entries = []
    for i, item in enumerate(raw):
        try:
            entries.append(PlaybookEntry(Phase(item["expect_phase"]), item["response_text"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise PlaybookError(f"playbook entry {i} malformed: {exc}")
    return ScriptedTransport(entries)
