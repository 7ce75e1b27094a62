"""Knowledge-corpus ingestion: overlapping-window chunking plus embed-and-store.

Chunk windows are exact offsets (no boundary snapping) so that chunking is
reproducible byte for byte. The default unit is characters; a whitespace-token
mode is available behind config.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

logger = logging.getLogger(__name__)

CHUNK_UNITS = ("character", "token")


class IngestError(Exception):
    """Raised when corpus ingestion cannot proceed."""


@dataclass(frozen=True)
class SourceDocument:
    """One plain-text knowledge document."""

    doc_id: str
    name: str
    text: str

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise ValueError("doc_id must be non-empty")


@dataclass(frozen=True)
class Chunk:
    """A window of a document, with its [start, end) span in chunk units."""

    doc_id: str
    chunk_index: int
    text: str
    span: tuple[int, int]


@dataclass(frozen=True)
class ChunkingConfig:
    chunk_size: int = 1000
    overlap_fraction: float = 0.25
    unit: str = "character"

    def __post_init__(self) -> None:
        if self.chunk_size <= 0:
            raise ValueError(f"chunk_size must be positive, got {self.chunk_size}")
        if not 0.0 <= self.overlap_fraction < 1.0:
            raise ValueError(
                f"overlap_fraction must be in [0, 1), got {self.overlap_fraction}"
            )
        if self.unit not in CHUNK_UNITS:
            raise ValueError(f"unit must be one of {CHUNK_UNITS}, got {self.unit!r}")
        if self.stride <= 0:
            raise ValueError("stride must be positive (overlap too large)")

    @property
    def overlap_length(self) -> int:
        return math.floor(self.overlap_fraction * self.chunk_size)

    @property
    def stride(self) -> int:
        return self.chunk_size - self.overlap_length


def _units(text: str, unit: str) -> Sequence[str] | str:
    return text if unit == "character" else text.split()


def _join(units: Sequence[str] | str, unit: str) -> str:
    return units if unit == "character" else " ".join(units)


def chunk_document(doc: SourceDocument, cfg: ChunkingConfig) -> list[Chunk]:
    """Split a document into overlapping windows at starts 0, stride, 2*stride, ...

    Emission stops once a window's end reaches the document end, so a final
    partial chunk appears only when the previous chunk falls short of the end.
    Empty documents yield an empty list.
    """
    units = _units(doc.text, cfg.unit)
    total = len(units)
    if total == 0:
        return []

    chunks: list[Chunk] = []
    start = 0
    index = 0
    while True:
        end = min(start + cfg.chunk_size, total)
        chunks.append(
            Chunk(
                doc_id=doc.doc_id,
                chunk_index=index,
                text=_join(units[start:end], cfg.unit),
                span=(start, end),
            )
        )
        if end >= total:
            break
        start += cfg.stride
        index += 1
    return chunks


def load_corpus_dir(corpus_dir: Path | str) -> list[SourceDocument]:
    """Read every ``*.txt`` file in a directory as one document (stem = doc_id)."""
    corpus_dir = Path(corpus_dir)
    if not corpus_dir.is_dir():
        raise IngestError(f"corpus directory not found: {corpus_dir}")
    docs = [
        SourceDocument(doc_id=p.stem, name=p.name, text=p.read_text(encoding="utf-8"))
        for p in sorted(corpus_dir.glob("*.txt"))
    ]
    if not docs:
        raise IngestError(f"no .txt documents in {corpus_dir}")
    return docs


def ingest_corpus(
    docs: Sequence[SourceDocument],
    cfg: ChunkingConfig,
    embed_texts: Callable[[list[str]], list],
    store,
    batch_size: int = 32,
) -> int:
    """Chunk every document, embed the chunks, and insert them into the store.

    Entry ids are assigned sequentially in document-then-chunk order, so
    repeated ingestion of the same corpus is deterministic. Returns the number
    of stored entries. An embedding failure aborts ingestion, identifying the
    failing chunk.
    """
    from .hnsw import VectorEntry

    seen: set[str] = set()
    for doc in docs:
        if doc.doc_id in seen:
            raise IngestError(f"duplicate doc_id in corpus: {doc.doc_id!r}")
        seen.add(doc.doc_id)

    all_chunks: list[Chunk] = []
    for doc in docs:
        all_chunks.extend(chunk_document(doc, cfg))

    entry_id = 0
    for batch_start in range(0, len(all_chunks), batch_size):
        batch = all_chunks[batch_start : batch_start + batch_size]
        try:
            vectors = embed_texts([c.text for c in batch])
        except Exception:
            # Re-run one by one to identify the failing chunk.
            vectors = []
            for c in batch:
                try:
                    vectors.extend(embed_texts([c.text]))
                except Exception as exc:
                    raise IngestError(
                        f"embedding failed for chunk {c.doc_id}[{c.chunk_index}]: {exc}"
                    ) from exc
        for chunk, vector in zip(batch, vectors):
            store.insert(
                VectorEntry(
                    entry_id=entry_id,
                    vector=vector,
                    payload={
                        "doc_id": chunk.doc_id,
                        "chunk_index": chunk.chunk_index,
                        "text": chunk.text,
                    },
                )
            )
            entry_id += 1

    logger.info("ingested %d chunks from %d documents", entry_id, len(docs))
    return entry_id
