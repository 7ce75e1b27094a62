"""Deterministic synthetic fixtures: benchmark records and a matching corpus.

The real benchmark and its 18-document corpus are proprietary and are not
shipped; these generators emit schema-compatible stand-ins. Each subject area
gets one knowledge document whose paragraphs restate the labels, so offline
retrieval has signal to find.
"""

from __future__ import annotations

import random
from pathlib import Path
from typing import Sequence

from .chunking import SourceDocument
from .datastore import SUBJECT_AREAS, BenchmarkRecord, write_benchmark

_RECORD_NOUNS = (
    "settlement", "interchange", "batch", "presentment", "chargeback",
    "reversal", "advice", "clearing", "ledger", "billing",
)
_FIELD_NOUNS = (
    "status_code", "posting_date", "amount_qualifier", "merchant_category",
    "routing_flag", "currency_code", "sequence_number", "response_indicator",
    "expiry_window", "audit_trail",
)
_FACTS = (
    "identifies the processing stage of the transaction",
    "carries the network-assigned lifecycle identifier",
    "indicates whether the entry settled on the same business day",
    "distinguishes originals from duplicate submissions",
    "records which endpoint produced the message",
    "marks entries that require manual review before posting",
    "encodes the applicable fee program for the transaction",
    "shows the local currency in which the transaction was acquired",
    "links the detail record back to its summary header",
    "flags records replayed after an upstream outage",
)
_FILLER = (
    "Values outside the documented range are rejected during intake validation.",
    "Historic records retain the value assigned at original processing time.",
    "Downstream reports aggregate this field at the daily batch level.",
    "Operations teams reconcile discrepancies during the nightly window.",
    "The field is mandatory for all record types introduced after release 14.",
    "Null values are backfilled from the corresponding summary record.",
)


def _slug(area: str) -> str:
    return area.lower().replace(" ", "_")


def generate_benchmark(seed: int = 0, n: int = 155) -> list[BenchmarkRecord]:
    """n records cycling through all fourteen subject areas, seeded."""
    rng = random.Random(seed)
    records = []
    for i in range(n):
        area = SUBJECT_AREAS[i % len(SUBJECT_AREAS)]
        record_noun = rng.choice(_RECORD_NOUNS)
        field_noun = rng.choice(_FIELD_NOUNS)
        fact = rng.choice(_FACTS)
        qid = f"q{i + 1:03d}"
        question = (
            f"What does the {field_noun} field on a {_slug(area)} {record_noun} "
            f"record indicate?"
        )
        label = (
            f"The {field_noun} field on the {_slug(area)} {record_noun} record "
            f"{fact}."
        )
        records.append(
            BenchmarkRecord(
                question_id=qid, subject_area=area, question=question, label=label
            )
        )
    return records


def generate_corpus(
    records: Sequence[BenchmarkRecord], seed: int = 0
) -> list[SourceDocument]:
    """One document per subject area, restating each record's label."""
    rng = random.Random(seed + 1)
    by_area: dict[str, list[BenchmarkRecord]] = {}
    for r in records:
        by_area.setdefault(r.subject_area, []).append(r)

    docs = []
    for area in SUBJECT_AREAS:
        area_records = by_area.get(area, [])
        if not area_records:
            continue
        paragraphs = [
            f"{area} operations manual. This document describes record layouts "
            f"and field semantics for the {_slug(area)} domain."
        ]
        for r in area_records:
            filler = " ".join(rng.sample(_FILLER, k=3))
            paragraphs.append(
                f"Reference {r.question_id}. {r.question} {r.label} {filler}"
            )
        docs.append(
            SourceDocument(
                doc_id=_slug(area),
                name=f"{_slug(area)}.txt",
                text="\n\n".join(paragraphs) + "\n",
            )
        )
    return docs


def write_fixture(out_dir: Path | str, seed: int = 0, n: int = 155) -> tuple[Path, Path]:
    """Write benchmark.jsonl plus a corpus/ directory; returns both paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = generate_benchmark(seed=seed, n=n)
    benchmark_path = out / "benchmark.jsonl"
    write_benchmark(records, benchmark_path)
    corpus_dir = out / "corpus"
    corpus_dir.mkdir(exist_ok=True)
    for doc in generate_corpus(records, seed=seed):
        (corpus_dir / f"{doc.doc_id}.txt").write_text(doc.text, encoding="utf-8")
    return benchmark_path, corpus_dir
