"""Chat-completion backends for the rephrasing pipeline.

Two implementations ship: an HTTP client for OpenAI-style chat endpoints
(bounded in-flight requests, exponential backoff) and a deterministic
offline mock keyed on the request content, so tests and reproducible
builds never touch the network.
"""

from __future__ import annotations

import os
import re
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass

import requests

from .errors import BackendError, ConfigError
from .rngs import derive_rng

TEMPERATURES = (1.1, 1.2, 1.3)

_REPHRASE_MARKER = re.compile(r"^\s*rephrase\s*=\s*(.*?)\s*$",
                              re.IGNORECASE | re.MULTILINE)


def extract_rephrase(raw_response: str) -> str | None:
    """Text after the first ``rephrase=`` marker line, or None.

    Detection is case-insensitive and whitespace-tolerant; an empty
    extraction counts as missing so the caller's retry path engages.
    """
    m = _REPHRASE_MARKER.search(raw_response)
    if m is None:
        return None
    return m.group(1) or None


def draw_temperature(rng) -> float:
    """Uniform draw from the allowed temperature set."""
    return TEMPERATURES[int(rng.integers(len(TEMPERATURES)))]


def build_messages(system_prompt: str, one_shot: str, payload: str) -> list[dict]:
    return [
        {"role": "system", "content": system_prompt},
        {"role": "user", "content": one_shot},
        {"role": "user", "content": payload},
    ]


class ChatBackend(ABC):
    """Minimal chat-completion interface: messages in, reply text out."""

    name: str = "abstract"

    @abstractmethod
    def complete(self, messages: list[dict], temperature: float) -> str:
        """Return the assistant reply text; raise BackendError on failure."""


class HttpChatBackend(ChatBackend):
    """OpenAI-style chat-completions client.

    Concurrency is bounded by a semaphore so a thread pool upstream can be
    wider than the polite in-flight limit. Retries use exponential backoff
    on transport errors, 429, and 5xx; other HTTP errors fail fast.
    """

    name = "http"

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str | None = None,
        timeout: float = 60.0,
        max_retries: int = 3,
        backoff_base: float = 0.5,
        max_inflight: int = 4,
        session=None,
        response_path: tuple = ("choices", 0, "message", "content"),
        extra_headers: dict | None = None,
        sleep=time.sleep,
    ):
        if not endpoint:
            raise ConfigError("chat endpoint must not be empty")
        if max_retries < 1 or max_inflight < 1:
            raise ConfigError("max_retries and max_inflight must be >= 1")
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.response_path = tuple(response_path)
        self.extra_headers = dict(extra_headers or {})
        self._session = session if session is not None else requests.Session()
        self._gate = threading.Semaphore(max_inflight)
        self._sleep = sleep

    @classmethod
    def from_env(cls, **overrides) -> "HttpChatBackend":
        """Build from SI_CHAT_* environment variables."""
        endpoint = os.environ.get("SI_CHAT_ENDPOINT", "")
        if not endpoint and "endpoint" not in overrides:
            raise ConfigError("SI_CHAT_ENDPOINT is not set")
        kwargs = {
            "endpoint": endpoint,
            "model": os.environ.get("SI_CHAT_MODEL", "gpt-4o"),
            "api_key": os.environ.get("SI_CHAT_API_KEY"),
            "max_inflight": int(os.environ.get("SI_CHAT_MAX_INFLIGHT", "4")),
            "max_retries": int(os.environ.get("SI_CHAT_RETRIES", "3")),
        }
        kwargs.update(overrides)
        return cls(**kwargs)

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json", **self.extra_headers}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def _extract(self, payload: dict) -> str:
        node = payload
        for step in self.response_path:
            try:
                node = node[step]
            except (KeyError, IndexError, TypeError):
                raise BackendError(
                    f"response is missing field path {self.response_path!r}"
                ) from None
        if not isinstance(node, str):
            raise BackendError(
                f"response field {self.response_path!r} is not a string"
            )
        return node

    def complete(self, messages: list[dict], temperature: float) -> str:
        body = {
            "model": self.model,
            "messages": messages,
            "temperature": temperature,
        }
        last_error = None
        with self._gate:
            for attempt in range(self.max_retries):
                if attempt:
                    self._sleep(self.backoff_base * 2 ** (attempt - 1))
                try:
                    resp = self._session.post(
                        self.endpoint,
                        json=body,
                        headers=self._headers(),
                        timeout=self.timeout,
                    )
                except requests.RequestException as exc:
                    last_error = BackendError(f"transport failure: {exc}")
                    continue
                if resp.status_code == 429 or resp.status_code >= 500:
                    last_error = BackendError(
                        f"server returned {resp.status_code}; retrying"
                    )
                    continue
                if resp.status_code != 200:
                    raise BackendError(
                        f"chat endpoint returned {resp.status_code}: "
                        f"{resp.text[:200]}"
                    )
                try:
                    payload = resp.json()
                except ValueError as exc:
                    raise BackendError(f"response is not JSON: {exc}") from exc
                return self._extract(payload)
        raise BackendError(
            f"chat request failed after {self.max_retries} attempts: {last_error}"
        )


_MOCK_STYLES = (
    "In other words, {s}",
    "Put differently, {s}",
    "Here is another way to say it: {s}",
    "Simply put, {s}",
)


class MockChatBackend(ChatBackend):
    """Offline deterministic backend.

    The reply depends only on (seed, final message content, temperature),
    never on call order, so concurrent pipelines stay byte-reproducible.
    ``marker_dropout`` and ``transport_failure`` deterministically fail a
    stable subset of requests to exercise the retry and fallback paths.
    """

    name = "mock"

    def __init__(self, seed: int = 0, marker_dropout: float = 0.0,
                 transport_failure: float = 0.0):
        if not 0 <= marker_dropout <= 1 or not 0 <= transport_failure <= 1:
            raise ConfigError("mock failure rates must be in [0, 1]")
        self.seed = seed
        self.marker_dropout = marker_dropout
        self.transport_failure = transport_failure

    def complete(self, messages: list[dict], temperature: float) -> str:
        if not messages:
            raise BackendError("no messages")
        content = messages[-1]["content"]
        rng = derive_rng(self.seed, "mock-chat", content, f"{temperature:.2f}")
        if rng.random() < self.transport_failure:
            raise BackendError("mock transport failure")
        if rng.random() < self.marker_dropout:
            return "I am not sure what you want me to do with this."
        sentence = content.split("sentence=", 1)[1] if "sentence=" in content else content
        style = _MOCK_STYLES[int(rng.integers(len(_MOCK_STYLES)))]
        rephrased = style.format(s=sentence.strip())
        return f"Sure, here is one option.\nrephrase={rephrased}"


@dataclass(frozen=True)
class RephraseRequest:
    """One structured rephrase call: prompts, payload, and temperature."""

    system_prompt: str
    one_shot: str
    payload: str
    temperature: float
    task: str

    def __post_init__(self):
        if self.temperature not in TEMPERATURES:
            raise ConfigError(
                f"temperature must be one of {TEMPERATURES}, got {self.temperature}"
            )
        if not self.payload.startswith("sentence="):
            raise ConfigError("payload must begin with 'sentence='")


@dataclass(frozen=True)
class RephraseResult:
    original: str
    rephrased: str
    raw_response: str
    temperature: float
    backend: str
    attempts: int
    fallback: bool


def rephrase(
    req: RephraseRequest,
    client: ChatBackend,
    max_attempts: int = 3,
    required_ids: tuple[int, ...] | None = None,
) -> RephraseResult:
    """Run one rephrase with retries; fall back to the original on failure.

    An attempt fails on transport error, missing/empty marker, or (when
    ``required_ids`` is given) an id multiset mismatch — rephrasing may
    change wording only, never which objects are cited.
    """
    from .tokens import extract_ids

    original = req.payload[len("sentence="):]
    messages = build_messages(req.system_prompt, req.one_shot, req.payload)
    raw = ""
    for attempt in range(1, max_attempts + 1):
        try:
            raw = client.complete(messages, req.temperature)
        except BackendError:
            continue
        out = extract_rephrase(raw)
        if out is None:
            continue
        if required_ids is not None and sorted(extract_ids(out)) != sorted(required_ids):
            continue
        return RephraseResult(
            original=original,
            rephrased=out,
            raw_response=raw,
            temperature=req.temperature,
            backend=client.name,
            attempts=attempt,
            fallback=False,
        )
    return RephraseResult(
        original=original,
        rephrased=original,
        raw_response=raw,
        temperature=req.temperature,
        backend=client.name,
        attempts=max_attempts,
        fallback=True,
    )
