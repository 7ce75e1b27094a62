"""Benchmark, answer, and grade schemas plus run-directory persistence.

Everything is JSONL (one object per line) because reasons and raw judge
replies contain commas and newlines; a flat CSV exporter exists for
spreadsheet users. A run directory holds run-meta.json, answers.jsonl,
grades.jsonl, and (after reporting) report.json; runs are immutable once
saved.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .grader import GradeScore, GradingFailure
from .pipeline import GeneratedAnswer

# Table of fourteen subject areas; the closed set for benchmark validation.
SUBJECT_AREAS = (
    "Acceptance",
    "Authentication",
    "Authorization",
    "Clearing and Settlement",
    "Commercial",
    "Dispute",
    "Fraud",
    "Issuing",
    "Master Data",
    "OCT",
    "Other",
    "Processing",
    "Product",
    "Token",
)

BENCHMARK_FIELDS = ("question_id", "subject_area", "question", "label")

RUN_META_FILE = "run-meta.json"
ANSWERS_FILE = "answers.jsonl"
GRADES_FILE = "grades.jsonl"
REPORT_FILE = "report.json"


class DatastoreError(Exception):
    pass


class ValidationError(DatastoreError):
    pass


@dataclass(frozen=True)
class BenchmarkRecord:
    question_id: str
    subject_area: str
    question: str
    label: str

    def __post_init__(self) -> None:
        if not self.question_id:
            raise ValidationError("question_id must be non-empty")
        if self.subject_area not in SUBJECT_AREAS:
            raise ValidationError(
                f"unknown subject_area {self.subject_area!r} for {self.question_id}"
            )
        if not self.question:
            raise ValidationError(f"question must be non-empty ({self.question_id})")
        if not self.label:
            raise ValidationError(f"label must be non-empty ({self.question_id})")


def _dump(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, ensure_ascii=False)


def load_benchmark(path: Path | str) -> list[BenchmarkRecord]:
    """Read and validate a benchmark JSONL file; errors name the line."""
    path = Path(path)
    if not path.exists():
        raise DatastoreError(f"benchmark file not found: {path}")
    records: list[BenchmarkRecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path} line {lineno}: malformed JSON: {exc}")
            missing = [f for f in BENCHMARK_FIELDS if f not in doc]
            if missing:
                raise ValidationError(
                    f"{path} line {lineno}: missing field(s) {missing}"
                )
            try:
                record = BenchmarkRecord(
                    question_id=doc["question_id"],
                    subject_area=doc["subject_area"],
                    question=doc["question"],
                    label=doc["label"],
                )
            except ValidationError as exc:
                raise ValidationError(f"{path} line {lineno}: {exc}")
            if record.question_id in seen:
                raise ValidationError(
                    f"{path} line {lineno}: duplicate question_id {record.question_id!r}"
                )
            seen.add(record.question_id)
            records.append(record)
    return records


def write_benchmark(records: Sequence[BenchmarkRecord], path: Path | str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for r in records:
            # Field order is part of the file contract.
            doc = {
                "question_id": r.question_id,
                "subject_area": r.subject_area,
                "question": r.question,
                "label": r.label,
            }
            handle.write(json.dumps(doc, ensure_ascii=False) + "\n")


# -- answer and grade line codecs ---------------------------------------------


def answer_to_dict(a: GeneratedAnswer) -> dict:
    return {
        "question_id": a.question_id,
        "answer_text": a.answer_text,
        "retrieved": [[eid, dist] for eid, dist in a.retrieved],
        "generator_model": a.generator_model,
        "created_at": a.created_at,
    }


def answer_from_dict(doc: dict) -> GeneratedAnswer:
    return GeneratedAnswer(
        question_id=doc["question_id"],
        answer_text=doc["answer_text"],
        retrieved=tuple((int(e), float(d)) for e, d in doc["retrieved"]),
        generator_model=doc["generator_model"],
        created_at=doc["created_at"],
    )


def grade_to_dict(g: GradeScore | GradingFailure) -> dict:
    if isinstance(g, GradingFailure):
        return {
            "question_id": g.question_id,
            "grader_id": g.grader_id,
            "failure": True,
            "error": g.error,
            "raw_response": g.raw_response,
        }
    return {
        "question_id": g.question_id,
        "grader_id": g.grader_id,
        "score": g.score,
        "reason": g.reason,
        "confidence": g.confidence,
        "raw_response": g.raw_response,
        "warnings": list(g.warnings),
    }


def grade_from_dict(doc: dict) -> GradeScore | GradingFailure:
    if doc.get("failure"):
        return GradingFailure(
            question_id=doc["question_id"],
            grader_id=doc["grader_id"],
            error=doc["error"],
            raw_response=doc.get("raw_response", ""),
        )
    return GradeScore(
        question_id=doc["question_id"],
        grader_id=doc["grader_id"],
        score=doc["score"],
        reason=doc.get("reason", ""),
        confidence=doc.get("confidence"),
        raw_response=doc.get("raw_response", ""),
        warnings=tuple(doc.get("warnings", ())),
    )


def write_jsonl(path: Path | str, docs: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for doc in docs:
            handle.write(_dump(doc) + "\n")


def read_jsonl(path: Path | str) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path} line {lineno}: malformed JSON: {exc}")
    return out


def load_grades(path: Path | str) -> list[GradeScore | GradingFailure]:
    return [grade_from_dict(d) for d in read_jsonl(path)]


def load_answers(path: Path | str) -> list[GeneratedAnswer]:
    return [answer_from_dict(d) for d in read_jsonl(path)]


# -- evaluation runs -----------------------------------------------------------


@dataclass
class EvaluationRun:
    run_id: str
    created_at: str
    config: dict = field(default_factory=dict)
    answers: list[GeneratedAnswer] = field(default_factory=list)
    grades: list[GradeScore | GradingFailure] = field(default_factory=list)

    def validate(self) -> None:
        if not self.run_id:
            raise ValidationError("run_id must be non-empty")
        answered = {a.question_id for a in self.answers}
        for g in self.grades:
            if g.question_id not in answered:
                raise ValidationError(
                    f"grade references question {g.question_id!r} with no answer"
                )


def save_run(run: EvaluationRun, root_dir: Path | str) -> Path:
    """Write a run directory; refuses a pre-existing run_id."""
    run.validate()
    root = Path(root_dir)
    run_dir = root / run.run_id
    if run_dir.exists():
        raise DatastoreError(f"run directory already exists: {run_dir}")
    run_dir.mkdir(parents=True)
    meta = {"run_id": run.run_id, "created_at": run.created_at, "config": run.config}
    (run_dir / RUN_META_FILE).write_text(
        json.dumps(meta, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )
    write_jsonl(run_dir / ANSWERS_FILE, (answer_to_dict(a) for a in run.answers))
    write_jsonl(run_dir / GRADES_FILE, (grade_to_dict(g) for g in run.grades))
    return run_dir


def load_run(run_dir: Path | str) -> EvaluationRun:
    run_dir = Path(run_dir)
    meta_path = run_dir / RUN_META_FILE
    if not meta_path.exists():
        raise DatastoreError(f"not a run directory (no {RUN_META_FILE}): {run_dir}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    answers_path = run_dir / ANSWERS_FILE
    grades_path = run_dir / GRADES_FILE
    run = EvaluationRun(
        run_id=meta["run_id"],
        created_at=meta["created_at"],
        config=meta.get("config", {}),
        answers=load_answers(answers_path) if answers_path.exists() else [],
        grades=load_grades(grades_path) if grades_path.exists() else [],
    )
    run.validate()
    return run


def export_grades_csv(
    grades: Sequence[GradeScore | GradingFailure], path: Path | str
) -> None:
    """Flat CSV view of a grades file (reasons collapsed to one cell)."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["question_id", "grader_id", "score", "confidence", "reason", "error"]
        )
        for g in grades:
            if isinstance(g, GradingFailure):
                writer.writerow([g.question_id, g.grader_id, "", "", "", g.error])
            else:
                writer.writerow(
                    [
                        g.question_id,
                        g.grader_id,
                        g.score,
                        "" if g.confidence is None else g.confidence,
                        g.reason,
                        "",
                    ]
                )
