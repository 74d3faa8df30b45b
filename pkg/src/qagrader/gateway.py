"""Uniform backend layer over completion and embedding providers.

Three completion backends share one interface: a live chat-style HTTP
backend (with retries, backoff, and a shared rate limiter), a replay backend
that returns recorded outputs keyed by prompt digest, and a deterministic
keyword-rule oracle that emits the same output contract as a live grader
("The student's score is 1. ...") for desk-scale end-to-end verification.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import httpx

from .errors import (
    BackendError,
    BackendUnavailableError,
    ConfigurationError,
    CredentialError,
    MissingRecordingError,
    ValidationError,
)
from .questions import EvaluationItem

KIND_LIVE_CHAT = "live_chat"
KIND_REPLAY = "replay"
KIND_ORACLE = "oracle"
KIND_LIVE_EMBEDDING = "live_embedding"
KIND_TEST_EMBEDDING = "test_embedding"
KINDS = (KIND_LIVE_CHAT, KIND_REPLAY, KIND_ORACLE, KIND_LIVE_EMBEDDING, KIND_TEST_EMBEDDING)
_LIVE_KINDS = (KIND_LIVE_CHAT, KIND_LIVE_EMBEDDING)

_RETRYABLE_STATUSES = {408, 409, 429, 500, 502, 503, 504}
_AUTH_STATUSES = {401, 403}


def prompt_hash(prompt: str) -> str:
    """SHA-256 hex digest of the exact prompt bytes (UTF-8)."""
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class BackendConfig:
    kind: str
    base_url: str | None = None
    model_name: str | None = None
    temperature: float = 0.0
    max_retries: int = 3
    request_timeout: float = 30.0
    rate_limit: float = 8.0
    credentials_ref: str | None = None
    replay_store: str | None = None
    embedding_dim: int = 64

    def validate(self) -> "BackendConfig":
        if self.kind not in KINDS:
            raise ConfigurationError(f"backend kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind in _LIVE_KINDS:
            if not self.base_url:
                raise ConfigurationError(f"{self.kind}: base_url is required")
            if not self.credentials_ref:
                raise ConfigurationError(f"{self.kind}: credentials_ref is required")
        if self.kind == KIND_REPLAY and not self.replay_store:
            raise ConfigurationError("replay: replay_store directory is required")
        if self.temperature < 0:
            raise ConfigurationError(f"temperature must be >= 0, got {self.temperature}")
        if self.rate_limit <= 0:
            raise ConfigurationError(f"rate_limit must be > 0, got {self.rate_limit}")
        if self.max_retries < 0:
            raise ConfigurationError(f"max_retries must be >= 0, got {self.max_retries}")
        return self

    @classmethod
    def from_dict(cls, section: dict) -> "BackendConfig":
        return cls(
            kind=section.get("kind", ""),
            base_url=section.get("base_url"),
            model_name=section.get("model_name"),
            temperature=float(section.get("temperature", 0.0)),
            max_retries=int(section.get("max_retries", 3)),
            request_timeout=float(section.get("request_timeout_ms", 30_000)) / 1000.0,
            rate_limit=float(section.get("rate_limit_rps", 8.0)),
            credentials_ref=section.get("credentials_ref"),
            replay_store=section.get("replay_store"),
            embedding_dim=int(section.get("embedding_dim", 64)),
        ).validate()


@dataclass(frozen=True)
class CompletionRecord:
    """Raw backend output plus provenance for auditability."""

    prompt_hash: str
    raw_text: str
    latency: float
    attempt_count: int
    backend_id: str

    def to_dict(self) -> dict:
        return {
            "prompt_hash": self.prompt_hash,
            "raw_text": self.raw_text,
            "latency": self.latency,
            "attempt_count": self.attempt_count,
            "backend_id": self.backend_id,
        }


class RateLimiter:
    """Thread-safe minimum-interval limiter shared by concurrent callers.

    Clock and sleep are injectable so tests can drive virtual time.
    """

    def __init__(
        self,
        rate_per_second: float,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if rate_per_second <= 0:
            raise ConfigurationError("rate_per_second must be > 0")
        self.interval = 1.0 / rate_per_second
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next_slot = 0.0

    def acquire(self) -> float:
        """Block until a slot is free; returns the slot timestamp."""
        with self._lock:
            now = self._clock()
            slot = max(now, self._next_slot)
            self._next_slot = slot + self.interval
        wait = slot - now
        if wait > 0:
            self._sleep(wait)
        return slot


class LiveChatBackend:
    """Chat-completion HTTP client with retries, exponential backoff, and a
    shared rate limiter.

    Wire format (any compatible endpoint can serve it):
      POST {base_url}/chat/completions
      {"model": ..., "temperature": ..., "messages": [{"role": "user", "content": prompt}]}
      -> {"choices": [{"message": {"content": text}}]}
    Credentials come from the environment variable named by credentials_ref
    and are sent as a bearer token.
    """

    def __init__(
        self,
        config: BackendConfig,
        *,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
        backoff_base: float = 0.5,
        rate_limiter: RateLimiter | None = None,
    ):
        self.config = config.validate()
        self.backend_id = f"live:{config.model_name or 'default'}"
        self.calls = 0
        self._sleep = sleep
        self._backoff_base = backoff_base
        self._limiter = rate_limiter or RateLimiter(config.rate_limit, sleep=sleep)
        token = os.environ.get(config.credentials_ref or "", "")
        if not token:
            raise CredentialError(
                f"credential env var {config.credentials_ref!r} is unset or empty"
            )
        self._client = httpx.Client(
            base_url=config.base_url or "",
            timeout=config.request_timeout,
            headers={"Authorization": f"Bearer {token}"},
            transport=transport,
        )

    def complete(
        self,
        prompt: str,
        *,
        item: EvaluationItem | None = None,
        student_text: str | None = None,
    ) -> CompletionRecord:
        if not prompt:
            raise ValidationError("prompt must be non-empty")
        payload = {
            "model": self.config.model_name,
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": prompt}],
        }
        start = time.monotonic()
        last_status: int | None = None
        last_error = "no attempt made"
        attempts = self.config.max_retries + 1
        for attempt in range(1, attempts + 1):
            self._limiter.acquire()
            self.calls += 1
            try:
                response = self._client.post("/chat/completions", json=payload)
            except httpx.HTTPError as exc:
                last_status, last_error = None, str(exc)
            else:
                if response.status_code == 200:
                    try:
                        text = response.json()["choices"][0]["message"]["content"]
                    except (KeyError, IndexError, ValueError) as exc:
                        raise BackendError(f"malformed completion response: {exc}") from exc
                    return CompletionRecord(
                        prompt_hash=prompt_hash(prompt),
                        raw_text=text,
                        latency=time.monotonic() - start,
                        attempt_count=attempt,
                        backend_id=self.backend_id,
                    )
                if response.status_code in _AUTH_STATUSES:
                    raise CredentialError(f"authentication failed (HTTP {response.status_code})")
                if response.status_code not in _RETRYABLE_STATUSES:
                    raise BackendError(
                        f"completion failed (HTTP {response.status_code}): {response.text[:200]}"
                    )
                last_status, last_error = response.status_code, response.text[:200]
            if attempt < attempts:
                self._sleep(self._backoff_base * (2 ** (attempt - 1)))
        raise BackendUnavailableError(
            f"completion failed after {attempts} attempt(s): {last_error}",
            last_status=last_status,
        )


class ReplayBackend:
    """Returns recorded completions keyed by prompt digest; a pure function
    of the prompt bytes. Unknown digests raise, never silently fall back."""

    def __init__(self, store_dir: str | Path):
        self.store = Path(store_dir)
        self.store.mkdir(parents=True, exist_ok=True)
        self.backend_id = "replay"
        self.calls = 0

    def record(self, prompt: str, raw_text: str) -> str:
        digest = prompt_hash(prompt)
        (self.store / f"{digest}.txt").write_text(raw_text, encoding="utf-8")
        return digest

    def complete(self, prompt, *, item=None, student_text=None) -> CompletionRecord:
        if not prompt:
            raise ValidationError("prompt must be non-empty")
        self.calls += 1
        digest = prompt_hash(prompt)
        path = self.store / f"{digest}.txt"
        if not path.exists():
            raise MissingRecordingError(f"no recording for prompt hash {digest}")
        return CompletionRecord(
            prompt_hash=digest,
            raw_text=path.read_text(encoding="utf-8"),
            latency=0.0,
            attempt_count=1,
            backend_id=self.backend_id,
        )


def oracle_grade(item: EvaluationItem, student_text: str) -> str:
    """Deterministic rule-based grading text for one (item, response) pair.

    Scores 1 when any accept phrase matches (case-insensitive substring) and
    no reject phrase does; the justification names the matched or missing
    phrase. Matching is deliberately coarse; it exists to verify the pipeline,
    not to grade well.
    """
    if item.oracle_rules is None:
        raise ConfigurationError(f"item {item.item_id} carries no oracle keyword rules")
    haystack = student_text.lower()
    rules = item.oracle_rules
    for phrase in rules.reject:
        if phrase.lower() in haystack:
            return (
                "The student's score is 0. "
                f'The answer mentions "{phrase}", which this evaluation point rejects.'
            )
    for phrase in rules.accept:
        if phrase.lower() in haystack:
            return (
                "The student's score is 1. "
                f'The answer mentions "{phrase}", which satisfies this evaluation point.'
            )
    expected = ", ".join(rules.accept) if rules.accept else "(none configured)"
    return (
        "The student's score is 0. "
        f"The answer does not mention any of the expected phrases: {expected}."
    )


class OracleBackend:
    """Wraps oracle_grade behind the completion interface; needs the item and
    student text alongside the prompt."""

    def __init__(self):
        self.backend_id = "oracle"
        self.calls = 0

    def complete(self, prompt, *, item=None, student_text=None) -> CompletionRecord:
        if not prompt:
            raise ValidationError("prompt must be non-empty")
        if item is None or student_text is None:
            raise ConfigurationError("oracle backend requires item and student_text")
        self.calls += 1
        return CompletionRecord(
            prompt_hash=prompt_hash(prompt),
            raw_text=oracle_grade(item, student_text),
            latency=0.0,
            attempt_count=1,
            backend_id=self.backend_id,
        )


class TestEmbeddingBackend:
    """Deterministic sentence encoder for tests: L2-normalized bag of token
    hashes, stable across processes."""

    __test__ = False  # not a pytest class, despite the name

    def __init__(self, dimension: int = 64):
        if dimension < 1:
            raise ConfigurationError("embedding dimension must be >= 1")
        self.dimension = dimension
        self.backend_id = f"test-embedding:{dimension}"

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        if not texts:
            raise ValidationError("embedding batch must be non-empty")
        vectors = []
        for i, text in enumerate(texts):
            if not str(text).strip():
                raise ValidationError(f"embedding batch[{i}]: text must be non-empty")
            vectors.append(self._vector(str(text)))
        return vectors

    def _vector(self, text: str) -> list[float]:
        from .questions import tokenize

        counts = [0.0] * self.dimension
        tokens = tokenize(text) or [text]
        for token in tokens:
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            counts[int.from_bytes(digest[:8], "big") % self.dimension] += 1.0
        norm = sum(c * c for c in counts) ** 0.5
        return [c / norm for c in counts]


class LiveEmbeddingBackend:
    """HTTP embedding client: POST {base_url}/embeddings
    {"model": ..., "input": [texts]} -> {"data": [{"embedding": [...]}]}."""

    def __init__(self, config: BackendConfig, *, transport: httpx.BaseTransport | None = None):
        self.config = config.validate()
        self.backend_id = f"live-embedding:{config.model_name or 'default'}"
        token = os.environ.get(config.credentials_ref or "", "")
        if not token:
            raise CredentialError(
                f"credential env var {config.credentials_ref!r} is unset or empty"
            )
        self._client = httpx.Client(
            base_url=config.base_url or "",
            timeout=config.request_timeout,
            headers={"Authorization": f"Bearer {token}"},
            transport=transport,
        )

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        if not texts:
            raise ValidationError("embedding batch must be non-empty")
        for i, text in enumerate(texts):
            if not str(text).strip():
                raise ValidationError(f"embedding batch[{i}]: text must be non-empty")
        response = self._client.post(
            "/embeddings", json={"model": self.config.model_name, "input": list(texts)}
        )
        if response.status_code in _AUTH_STATUSES:
            raise CredentialError(f"authentication failed (HTTP {response.status_code})")
        if response.status_code != 200:
            raise BackendError(f"embedding failed (HTTP {response.status_code})")
        try:
            return [row["embedding"] for row in response.json()["data"]]
        except (KeyError, ValueError) as exc:
            raise BackendError(f"malformed embedding response: {exc}") from exc


def make_backend(config: BackendConfig, **kwargs):
    """Build a completion backend from its config section."""
    config.validate()
    if config.kind == KIND_LIVE_CHAT:
        return LiveChatBackend(config, **kwargs)
    if config.kind == KIND_REPLAY:
        return ReplayBackend(config.replay_store or "")
    if config.kind == KIND_ORACLE:
        return OracleBackend()
    raise ConfigurationError(f"{config.kind} is not a completion backend")


def make_embedding_backend(config: BackendConfig, **kwargs):
    config.validate()
    if config.kind == KIND_TEST_EMBEDDING:
        return TestEmbeddingBackend(config.embedding_dim)
    if config.kind == KIND_LIVE_EMBEDDING:
        return LiveEmbeddingBackend(config, **kwargs)
    raise ConfigurationError(f"{config.kind} is not an embedding backend")


def complete(prompt: str, config: BackendConfig, **kwargs) -> CompletionRecord:
    """One-shot completion against a config (live or replay)."""
    return make_backend(config, **kwargs).complete(prompt)


def embed(texts: Sequence[str], config: BackendConfig, **kwargs) -> list[list[float]]:
    """One-shot embedding batch against a config."""
    return make_embedding_backend(config, **kwargs).embed(texts)
