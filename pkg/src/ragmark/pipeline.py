"""Single-turn retrieval-augmented QA: embed, retrieve top-K, prompt, answer.

The generation prompt is a fixed two-part template (an honesty-aware system
instruction plus a context-then-question user message) shipped under
templates/ and checksummed into run metadata. Context chunks are ordered by
ascending retrieval distance, most relevant first.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable, Sequence

from .chunking import Chunk
from .gateway import ChatRequest, Gateway, Message
from .assets import template_text
from .hnsw import HnswIndex

logger = logging.getLogger(__name__)


class PipelineError(Exception):
    pass


class AnswerError(PipelineError):
    """Generation failed for a specific question."""

    def __init__(self, question_id: str, cause: Exception):
        super().__init__(f"answer generation failed for {question_id}: {cause}")
        self.question_id = question_id
        self.cause = cause


@dataclass(frozen=True)
class RetrievalConfig:
    top_k: int = 3
    context_separator: str = "\n---\n"

    def __post_init__(self) -> None:
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")


@dataclass(frozen=True)
class GeneratedAnswer:
    """A generated answer plus its retrieval provenance."""

    question_id: str
    answer_text: str
    retrieved: tuple[tuple[int, float], ...]  # (entry_id, distance) ascending
    generator_model: str
    created_at: str

    def __post_init__(self) -> None:
        dists = [d for _, d in self.retrieved]
        if dists != sorted(dists):
            raise ValueError("retrieved provenance must be ascending by distance")


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def build_context(chunks: Sequence[Chunk | str], sep: str) -> str:
    """Join chunk texts (already ordered by ascending distance) with ``sep``."""
    if not chunks:
        raise PipelineError("cannot build context from an empty chunk list")
    texts = [c.text if isinstance(c, Chunk) else c for c in chunks]
    return sep.join(texts)


def answer_prompt(question: str, context: str) -> tuple[Message, Message]:
    system = template_text("answer_system.txt")
    user = (
        template_text("answer_user.txt")
        .replace("{context}", context)
        .replace("{question}", question)
    )
    return (Message("system", system), Message("user", user))


def answer_question(
    record,
    index: HnswIndex,
    gateway: Gateway,
    cfg: RetrievalConfig | None = None,
    generator_model: str = "gpt-4",
    now: Callable[[], str] = utc_now_iso,
) -> GeneratedAnswer:
    """Answer one benchmark question against a frozen index."""
    cfg = cfg or RetrievalConfig()
    if len(index) == 0:
        raise PipelineError("cannot answer against an empty store")
    try:
        query_vec = gateway.embed_texts([record.question])[0]
        hits = index.search(query_vec, k=cfg.top_k)
        context = build_context(
            [index.payload(eid)["text"] for eid, _ in hits], cfg.context_separator
        )
        req = ChatRequest(
            model_id=generator_model,
            messages=answer_prompt(record.question, context),
            temperature=0.0,
        )
        resp = gateway.complete(req)
    except PipelineError:
        raise
    except Exception as exc:
        raise AnswerError(record.question_id, exc) from exc
    return GeneratedAnswer(
        question_id=record.question_id,
        answer_text=resp.text,
        retrieved=tuple((eid, dist) for eid, dist in hits),
        generator_model=generator_model,
        created_at=now(),
    )


def answer_batch(
    records: Sequence,
    index: HnswIndex,
    gateway: Gateway,
    cfg: RetrievalConfig | None = None,
    generator_model: str = "gpt-4",
    now: Callable[[], str] = utc_now_iso,
    parallelism: int = 4,
    progress: Callable[[int, int], None] | None = None,
) -> tuple[list[GeneratedAnswer], list[AnswerError]]:
    """Answer every record, preserving input order; failures are collected.

    ``progress`` is invoked as (done, total) after each item settles.
    """

    def one(record):
        return answer_question(record, index, gateway, cfg, generator_model, now)

    answers: list[GeneratedAnswer] = []
    failures: list[AnswerError] = []
    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        futures = [pool.submit(one, r) for r in records]
        for done, (record, future) in enumerate(zip(records, futures), 1):
            try:
                answers.append(future.result())
            except AnswerError as exc:
                failures.append(exc)
            except PipelineError as exc:
                failures.append(AnswerError(record.question_id, exc))
            if progress is not None:
                progress(done, len(records))
    if failures:
        logger.warning("%d of %d answers failed", len(failures), len(records))
    return answers, failures
