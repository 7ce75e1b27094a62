"""HTTP JSON API for human grading sessions.

Serves items one at a time per grader (benchmark file order, so every grader
sees the same sequence and pairwise overlap is maximal), validates incoming
scores through the same GradeScore rules as LLM grades, and appends them
durably to the run's grades.jsonl. Grades are immutable once submitted.
Static UI assets are served at /.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from .datastore import (
    GRADES_FILE,
    BenchmarkRecord,
    grade_from_dict,
    grade_to_dict,
    read_jsonl,
)
from .grader import GradeScore, Rubric
from .pipeline import GeneratedAnswer

logger = logging.getLogger(__name__)

DEFAULT_STATIC_DIR = Path(__file__).parent / "static"


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse({"code": code, "message": message}, status_code=status)


@dataclass
class AnnotationStore:
    """Grading state for one run: items, registered graders, stored grades."""

    records: list[BenchmarkRecord]
    answers: dict[str, GeneratedAnswer]
    graders: tuple[str, ...]
    grades_path: Path
    rubric: Rubric = field(default_factory=Rubric.default)

    def __post_init__(self) -> None:
        self._lock = threading.Lock()
        self._submitted: dict[tuple[str, str], GradeScore] = {}
        # Items a grader can see: benchmark order, restricted to answered ones.
        self.items = [r for r in self.records if r.question_id in self.answers]
        if self.grades_path.exists():
            for doc in read_jsonl(self.grades_path):
                grade = grade_from_dict(doc)
                if isinstance(grade, GradeScore):
                    self._submitted[(grade.grader_id, grade.question_id)] = grade

    def is_registered(self, grader_id: str) -> bool:
        return grader_id in self.graders

    def next_item(self, grader_id: str) -> BenchmarkRecord | None:
        with self._lock:
            for record in self.items:
                if (grader_id, record.question_id) not in self._submitted:
                    return record
        return None

    def progress(self) -> dict:
        with self._lock:
            counts = {
                g: sum(1 for (gid, _qid) in self._submitted if gid == g)
                for g in self.graders
            }
        return {
            "total": len(self.items),
            "graders": [
                {"grader_id": g, "graded": counts[g], "total": len(self.items)}
                for g in self.graders
            ],
        }

    def submit(self, grade: GradeScore) -> GradeScore:
        """Append one grade; duplicate (grader, question) submissions raise."""
        key = (grade.grader_id, grade.question_id)
        with self._lock:
            if key in self._submitted:
                raise DuplicateGradeError(grade.grader_id, grade.question_id)
            line = json.dumps(
                grade_to_dict(grade), sort_keys=True, ensure_ascii=False
            )
            with open(self.grades_path, "a", encoding="utf-8") as handle:
                handle.write(line + "\n")
                handle.flush()
                os.fsync(handle.fileno())
            self._submitted[key] = grade
        return grade


class DuplicateGradeError(Exception):
    def __init__(self, grader_id: str, question_id: str):
        super().__init__(f"{grader_id} already graded {question_id}")
        self.grader_id = grader_id
        self.question_id = question_id


def create_app(store: AnnotationStore, static_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="ragmark annotation service")

    @app.get("/api/next")
    def api_next(grader: str = ""):
        if not store.is_registered(grader):
            return _error(403, "unknown_grader", f"grader {grader!r} is not registered")
        record = store.next_item(grader)
        if record is None:
            return Response(status_code=204)
        answer = store.answers[record.question_id]
        return {
            "question_id": record.question_id,
            "subject_area": record.subject_area,
            "question": record.question,
            "label": record.label,
            "answer": answer.answer_text,
            "rubric": store.rubric.render(),
        }

    @app.post("/api/grades")
    async def api_grades(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error(422, "invalid_body", "request body must be JSON")
        if not isinstance(body, dict):
            return _error(422, "invalid_body", "request body must be a JSON object")
        grader_id = body.get("grader_id", "")
        question_id = body.get("question_id", "")
        score = body.get("score")
        reason = body.get("reason", "")
        if not store.is_registered(grader_id):
            return _error(403, "unknown_grader", f"grader {grader_id!r} is not registered")
        if question_id not in store.answers:
            return _error(404, "unknown_question", f"no item {question_id!r}")
        if not isinstance(reason, str):
            return _error(422, "invalid_reason", "reason must be a string")
        try:
            # Same validation path as LLM-produced grades.
            grade = GradeScore(
                question_id=question_id,
                grader_id=grader_id,
                score=score,
                reason=reason,
                confidence=None,
                raw_response="",
            )
        except ValueError as exc:
            return _error(422, "invalid_score", str(exc))
        try:
            stored = store.submit(grade)
        except DuplicateGradeError as exc:
            return _error(409, "duplicate_grade", str(exc))
        return JSONResponse(grade_to_dict(stored), status_code=201)

    @app.get("/api/progress")
    def api_progress():
        return store.progress()

    assets = static_dir or DEFAULT_STATIC_DIR
    if assets.is_dir():
        app.mount("/", StaticFiles(directory=assets, html=True), name="ui")
    return app


def store_for_run(
    records: Sequence[BenchmarkRecord],
    answers: Sequence[GeneratedAnswer],
    graders: Sequence[str],
    run_dir: Path | str,
    rubric: Rubric | None = None,
) -> AnnotationStore:
    return AnnotationStore(
        records=list(records),
        answers={a.question_id: a for a in answers},
        graders=tuple(graders),
        grades_path=Path(run_dir) / GRADES_FILE,
        rubric=rubric or Rubric.default(),
    )
