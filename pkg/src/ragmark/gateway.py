"""Provider-agnostic chat-completion and embedding client.

Three backends share one surface: an OpenAI-compatible HTTP backend for real
providers, a replay backend that serves chat responses from an on-disk cache
keyed by request hash (recording through a source backend when configured),
and a synthetic backend that fabricates deterministic responses: useful both
as a replay record source and for fully offline runs. Replay and synthetic
backends embed text as seeded pseudo-random unit vectors, so offline retrieval
is deterministic without caching thousands of embedding calls.

The Gateway wrapper adds bounded concurrency and retry with exponential
backoff and seeded full jitter.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import httpx
import numpy as np

logger = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant")

ENV_API_BASE = "RAGMARK_API_BASE"
ENV_API_KEY = "RAGMARK_API_KEY"


class GatewayError(Exception):
    """Base for gateway failures."""


class AuthError(GatewayError):
    """Authentication/authorization failure; never retried."""


class TransientError(GatewayError):
    """Timeout, rate limit, or 5xx; retried with backoff."""


class MalformedResponseError(GatewayError):
    """Provider reply did not match the expected wire shape."""


class RetryExhaustedError(GatewayError):
    """All retry attempts failed."""


class ReplayCacheMiss(GatewayError):
    def __init__(self, request_hash: str):
        super().__init__(
            f"replay cache miss for request hash {request_hash}; "
            "prime the cache or enable a record source"
        )
        self.request_hash = request_hash


@dataclass(frozen=True)
class Message:
    role: str
    content: str


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    messages: tuple[Message, ...]
    temperature: float = 0.0
    max_output: int | None = None

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("ChatRequest requires at least one message")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        for m in self.messages:
            if m.role not in ROLES:
                raise ValueError(f"invalid role {m.role!r}")

    @property
    def prompt_text(self) -> str:
        return "\n".join(m.content for m in self.messages)


@dataclass(frozen=True)
class ChatResponse:
    text: str
    model_id: str
    usage: tuple[int, int] = (0, 0)  # (prompt_units, output_units)
    latency_ms: float = 0.0


@dataclass(frozen=True)
class EmbedRequest:
    texts: tuple[str, ...]
    model_id: str = "text-embedding-ada-002"


@dataclass(frozen=True)
class EmbedResponse:
    vectors: tuple[np.ndarray, ...]


def request_hash(req: ChatRequest) -> str:
    """Stable SHA-256 over the canonical JSON serialization of a request."""
    doc = {
        "kind": "chat",
        "model": req.model_id,
        "temperature": req.temperature,
        "max_output": req.max_output,
        "messages": [{"role": m.role, "content": m.content} for m in req.messages],
    }
    blob = json.dumps(doc, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class DeterministicEmbedder:
    """Hashes text into a seeded pseudo-random unit vector of fixed dim."""

    def __init__(self, dim: int, seed: int = 0):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.seed = seed

    def __call__(self, text: str) -> np.ndarray:
        digest = hashlib.sha256(f"{self.seed}:{text}".encode("utf-8")).digest()
        rng = np.random.Generator(
            np.random.PCG64(int.from_bytes(digest[:8], "little"))
        )
        vec = rng.standard_normal(self.dim)
        vec /= np.linalg.norm(vec)
        return vec.astype(np.float32)


class OpenAICompatBackend:
    """Chat-completions and embeddings over an OpenAI-compatible JSON API."""

    def __init__(
        self,
        base_url: str,
        api_key: str = "",
        timeout: float = 30.0,
        client: httpx.Client | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self._client = client or httpx.Client(timeout=timeout)
        self._headers = {"Content-Type": "application/json"}
        if api_key:
            self._headers["Authorization"] = f"Bearer {api_key}"

    @classmethod
    def from_env(cls, timeout: float = 30.0) -> "OpenAICompatBackend":
        base = os.environ.get(ENV_API_BASE, "").strip()
        if not base:
            raise GatewayError(f"{ENV_API_BASE} is not set")
        return cls(base, os.environ.get(ENV_API_KEY, ""), timeout=timeout)

    def _post(self, path: str, payload: dict) -> dict:
        try:
            resp = self._client.post(
                f"{self.base_url}{path}", json=payload, headers=self._headers
            )
        except httpx.TimeoutException as exc:
            raise TransientError(f"timeout calling {path}: {exc}") from exc
        except httpx.TransportError as exc:
            raise TransientError(f"transport failure calling {path}: {exc}") from exc
        if resp.status_code in (401, 403):
            raise AuthError(f"auth failure ({resp.status_code}) calling {path}")
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientError(f"retryable status {resp.status_code} from {path}")
        if resp.status_code != 200:
            raise GatewayError(f"unexpected status {resp.status_code} from {path}")
        try:
            return resp.json()
        except ValueError as exc:
            raise MalformedResponseError(f"non-JSON reply from {path}") from exc

    def complete_once(self, req: ChatRequest) -> ChatResponse:
        payload: dict = {
            "model": req.model_id,
            "messages": [{"role": m.role, "content": m.content} for m in req.messages],
            "temperature": req.temperature,
        }
        if req.max_output is not None:
            payload["max_tokens"] = req.max_output
        started = time.monotonic()
        body = self._post("/chat/completions", payload)
        latency = (time.monotonic() - started) * 1000.0
        try:
            text = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponseError("reply lacks choices[0].message.content") from exc
        if text is None:
            raise MalformedResponseError("reply content is null")
        usage = body.get("usage") or {}
        return ChatResponse(
            text=text,
            model_id=body.get("model", req.model_id),
            usage=(usage.get("prompt_tokens", 0), usage.get("completion_tokens", 0)),
            latency_ms=latency,
        )

    def embed_once(self, req: EmbedRequest) -> EmbedResponse:
        body = self._post(
            "/embeddings", {"model": req.model_id, "input": list(req.texts)}
        )
        try:
            rows = sorted(body["data"], key=lambda d: d["index"])
            vectors = [np.asarray(r["embedding"], dtype=np.float32) for r in rows]
        except (KeyError, TypeError) as exc:
            raise MalformedResponseError("reply lacks data[].embedding") from exc
        if len(vectors) != len(req.texts):
            raise MalformedResponseError(
                f"expected {len(req.texts)} embeddings, got {len(vectors)}"
            )
        return EmbedResponse(vectors=tuple(vectors))


class SyntheticBackend:
    """Fabricates deterministic responses from the request hash.

    Grading prompts (recognized by their rubric delimiters) get a parseable
    "Score/Rating: [[n]]" reply; anything else gets a synthetic answer. Used
    offline and as the record source when priming a replay cache.
    """

    def __init__(self, embedder: DeterministicEmbedder):
        self.embedder = embedder

    def complete_once(self, req: ChatRequest) -> ChatResponse:
        prompt = req.prompt_text
        h = request_hash(req)
        score = int(h[:8], 16) % 5 + 1
        if "[The Start of Grading Rubric]" in prompt:
            text = (
                f"Rating: [[{score}]], Reason: [[Synthetic legacy assessment "
                f"{h[:12]} for this answer.]]"
            )
        elif "[Start of Grading Rubric]" in prompt:
            if "followed by your confidence level of the grading" in prompt:
                confidence = int(h[8:16], 16) % 101
                text = (
                    f"Score: [[{score}]], Confidence: [[{confidence}]], "
                    f"Reason: [[Synthetic assessment {h[:12]} for this answer.]]"
                )
            else:
                text = (
                    f"Score: [[{score}]], Reason: [[Synthetic assessment "
                    f"{h[:12]} for this answer.]]"
                )
        else:
            text = (
                f"Based on the provided context, the synthetic answer is "
                f"derived deterministically (ref {h[:12]})."
            )
        return ChatResponse(
            text=text,
            model_id=req.model_id,
            usage=(len(prompt) // 4, len(text) // 4),
            latency_ms=0.0,
        )

    def embed_once(self, req: EmbedRequest) -> EmbedResponse:
        return EmbedResponse(vectors=tuple(self.embedder(t) for t in req.texts))


class ReplayBackend:
    """Replays chat responses from ``cache_dir/<request-hash>.json``.

    On a cache miss, records through ``record_from`` when provided, otherwise
    raises :class:`ReplayCacheMiss`. Embeddings are always synthesized by the
    deterministic embedder so offline retrieval needs no cache.
    """

    def __init__(
        self,
        cache_dir: Path | str,
        embedder: DeterministicEmbedder,
        record_from=None,
    ):
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.embedder = embedder
        self.record_from = record_from
        self._write_lock = threading.Lock()

    def _path(self, h: str) -> Path:
        return self.cache_dir / f"{h}.json"

    def prime(self, req: ChatRequest, text: str) -> str:
        """Store a canned response for a request; returns the request hash."""
        h = request_hash(req)
        self._store(h, ChatResponse(text=text, model_id=req.model_id))
        return h

    def _store(self, h: str, resp: ChatResponse) -> None:
        doc = {
            "text": resp.text,
            "model_id": resp.model_id,
            "usage": list(resp.usage),
            "latency_ms": resp.latency_ms,
        }
        with self._write_lock:
            self._path(h).write_text(
                json.dumps(doc, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
                encoding="utf-8",
            )

    def complete_once(self, req: ChatRequest) -> ChatResponse:
        h = request_hash(req)
        path = self._path(h)
        if path.exists():
            doc = json.loads(path.read_text(encoding="utf-8"))
            return ChatResponse(
                text=doc["text"],
                model_id=doc.get("model_id", req.model_id),
                usage=tuple(doc.get("usage", (0, 0))),
                latency_ms=doc.get("latency_ms", 0.0),
            )
        if self.record_from is not None:
            resp = self.record_from.complete_once(req)
            self._store(h, resp)
            return resp
        raise ReplayCacheMiss(h)

    def embed_once(self, req: EmbedRequest) -> EmbedResponse:
        return EmbedResponse(vectors=tuple(self.embedder(t) for t in req.texts))


class Gateway:
    """Retry, jitter, and bounded concurrency around a backend.

    Retry delays use full jitter: uniform in [0, base * factor**attempt)
    drawn from an RNG seeded per request, so tests and reruns are stable.
    """

    def __init__(
        self,
        backend,
        max_retries: int = 5,
        backoff_base: float = 0.5,
        backoff_factor: float = 2.0,
        max_concurrency: int = 4,
        retry_seed: int = 0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if max_retries < 1:
            raise ValueError("max_retries must be >= 1")
        if max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")
        self.backend = backend
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.backoff_factor = backoff_factor
        self.max_concurrency = max_concurrency
        self.retry_seed = retry_seed
        self._sleep = sleep
        self._sem = threading.BoundedSemaphore(max_concurrency)

    def _with_retries(self, call, seed_key: str):
        rng = random.Random(f"{self.retry_seed}:{seed_key}")
        last: Exception | None = None
        for attempt in range(self.max_retries):
            try:
                with self._sem:
                    return call()
            except AuthError:
                raise
            except TransientError as exc:
                last = exc
                if attempt + 1 == self.max_retries:
                    break
                delay = rng.uniform(
                    0.0, self.backoff_base * self.backoff_factor**attempt
                )
                logger.debug(
                    "transient failure (attempt %d/%d), retrying in %.2fs: %s",
                    attempt + 1,
                    self.max_retries,
                    delay,
                    exc,
                )
                self._sleep(delay)
        raise RetryExhaustedError(
            f"gave up after {self.max_retries} attempts: {last}"
        ) from last

    def complete(self, req: ChatRequest) -> ChatResponse:
        return self._with_retries(
            lambda: self.backend.complete_once(req), request_hash(req)
        )

    def embed(self, req: EmbedRequest) -> EmbedResponse:
        resp = self._with_retries(
            lambda: self.backend.embed_once(req), f"embed:{len(req.texts)}"
        )
        if len(resp.vectors) != len(req.texts):
            raise MalformedResponseError(
                f"embedding count mismatch: {len(resp.vectors)} != {len(req.texts)}"
            )
        return resp

    def embed_texts(self, texts: Sequence[str], model_id: str | None = None) -> list:
        req = (
            EmbedRequest(texts=tuple(texts))
            if model_id is None
            else EmbedRequest(texts=tuple(texts), model_id=model_id)
        )
        return list(self.embed(req).vectors)

    def complete_many(self, reqs: Sequence[ChatRequest]) -> list[ChatResponse]:
        """Complete a batch in input order with bounded parallelism."""
        with ThreadPoolExecutor(max_workers=self.max_concurrency) as pool:
            return list(pool.map(self.complete, reqs))
