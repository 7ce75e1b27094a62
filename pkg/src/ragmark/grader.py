"""Rubric-based answer grading: prompt rendering, score parsing, verdicts.

The grader sends one user message built from a fixed template (``plain`` is
the current design, ``confidence`` adds a verbalized 0-100 confidence request,
``legacy`` is the earlier instruction/rubric wording kept for ablation) and
parses the judge's structured reply:

    Score: [[2]], Reason: [[...]]                      (plain)
    Score: [[3]], Confidence: [[50]], Reason: [[...]]  (confidence)
    Rating: [[4]], Reason: [[...]]                     (legacy)

Scores 1-3 map to a reject verdict, 4-5 to accept.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from .assets import template_text
from .gateway import ChatRequest, Gateway, Message

GRADING_MODES = ("plain", "confidence", "legacy")

_TEMPLATE_FILES = {
    "plain": "grading_plain.txt",
    "confidence": "grading_confidence.txt",
    "legacy": "grading_legacy.txt",
}
_RUBRIC_FILES = {"default": "rubric_default.txt", "legacy": "rubric_legacy.txt"}

_PLACEHOLDER = re.compile(r"\{(rubric|question|label|answer)\}")
_LEVEL_LINE = re.compile(r"^([1-5]): (.+)$")


class GradeParseError(Exception):
    """Raised when a judge reply has no usable score."""


@dataclass(frozen=True)
class Rubric:
    """Five contiguous quality levels, 1 (worst) through 5 (best)."""

    levels: dict[int, str]

    def __post_init__(self) -> None:
        if sorted(self.levels) != [1, 2, 3, 4, 5]:
            raise ValueError("rubric must define exactly levels 1..5")
        if any(not text for text in self.levels.values()):
            raise ValueError("rubric level descriptions must be non-empty")

    def render(self) -> str:
        return "\n".join(f"{n}: {self.levels[n]}" for n in sorted(self.levels))

    @classmethod
    def from_text(cls, text: str) -> "Rubric":
        levels: dict[int, str] = {}
        for line in text.strip().splitlines():
            m = _LEVEL_LINE.match(line)
            if not m:
                raise ValueError(f"unparseable rubric line: {line!r}")
            levels[int(m.group(1))] = m.group(2)
        return cls(levels)

    @classmethod
    def named(cls, name: str) -> "Rubric":
        if name not in _RUBRIC_FILES:
            raise ValueError(f"unknown rubric {name!r}; options: {sorted(_RUBRIC_FILES)}")
        return cls.from_text(template_text(_RUBRIC_FILES[name]))

    @classmethod
    def default(cls) -> "Rubric":
        return cls.named("default")

    @classmethod
    def legacy(cls) -> "Rubric":
        return cls.named("legacy")


class Verdict(enum.IntEnum):
    REJECT = 0
    ACCEPT = 1

    @property
    def label(self) -> str:
        return self.name.lower()


def to_binary(score: int) -> Verdict:
    """Map a 1-5 quality score to accept (4, 5) or reject (1, 2, 3)."""
    if not isinstance(score, int) or isinstance(score, bool) or not 1 <= score <= 5:
        raise ValueError(f"score must be an integer in 1..5, got {score!r}")
    return Verdict.ACCEPT if score >= 4 else Verdict.REJECT


def render_grading_prompt(
    question: str, label: str, answer: str, rubric: Rubric, mode: str = "plain"
) -> str:
    """Instantiate the grading template for one item, byte for byte."""
    if mode not in GRADING_MODES:
        raise ValueError(f"unknown grading mode {mode!r}")
    if not label:
        raise ValueError("label must be non-empty: a reference-based grade is undefined without it")
    if not question or not answer:
        raise ValueError("question and answer must be non-empty")
    template = template_text(_TEMPLATE_FILES[mode])
    values = {
        "rubric": rubric.render(),
        "question": question,
        "label": label,
        "answer": answer,
    }
    return _PLACEHOLDER.sub(lambda m: values[m.group(1)], template)


@dataclass(frozen=True)
class ParsedGrade:
    score: int
    confidence: int | None
    reason: str
    warnings: tuple[str, ...] = ()


def parse_grade(raw: str, mode: str = "plain") -> ParsedGrade:
    """Extract (score, optional confidence, reason) from a judge reply.

    The first ``Score: [[N]]`` marker wins (``Rating:`` in legacy mode);
    surrounding prose is ignored. A reason with a missing closing ``]]`` is
    consumed to end of text with a warning rather than rejected.
    """
    if mode not in GRADING_MODES:
        raise ValueError(f"unknown grading mode {mode!r}")
    if not raw or not raw.strip():
        raise GradeParseError("empty grading response")
    warnings: list[str] = []

    marker = "Rating" if mode == "legacy" else "Score"
    score_matches = re.findall(rf"{marker}:\s*\[\[\s*(-?\d+)\s*\]\]", raw)
    if not score_matches:
        raise GradeParseError(f"no '{marker}: [[N]]' marker found")
    if len(score_matches) > 1:
        warnings.append("multiple-score-markers")
    score = int(score_matches[0])
    if not 1 <= score <= 5:
        raise GradeParseError(f"score {score} outside 1..5")

    confidence: int | None = None
    conf_match = re.search(r"Confidence:\s*\[\[\s*(-?\d+)\s*\]\]", raw)
    if conf_match:
        confidence = int(conf_match.group(1))
        if not 0 <= confidence <= 100:
            raise GradeParseError(f"confidence {confidence} outside 0..100")

    reason = ""
    # The (?!\]) lookahead keeps a reason's own trailing "]" out of the
    # closing delimiter: "...x]]]" parses as reason "...x]".
    reason_match = re.search(r"Reason:\s*\[\[(.*?)\]\](?!\])", raw, re.DOTALL)
    if reason_match:
        reason = reason_match.group(1)
    else:
        open_match = re.search(r"Reason:\s*\[\[(.*)\Z", raw, re.DOTALL)
        if open_match:
            reason = open_match.group(1)
            warnings.append("unterminated-reason")
        else:
            warnings.append("missing-reason")

    return ParsedGrade(
        score=score, confidence=confidence, reason=reason, warnings=tuple(warnings)
    )


@dataclass(frozen=True)
class GradeScore:
    """One grader's judgment of one answer."""

    question_id: str
    grader_id: str
    score: int
    reason: str = ""
    confidence: int | None = None
    raw_response: str = ""
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.question_id:
            raise ValueError("question_id must be non-empty")
        if not self.grader_id:
            raise ValueError("grader_id must be non-empty")
        if not isinstance(self.score, int) or isinstance(self.score, bool):
            raise ValueError(f"score must be an integer, got {self.score!r}")
        if not 1 <= self.score <= 5:
            raise ValueError(f"score {self.score} outside 1..5")
        if self.confidence is not None and not 0 <= self.confidence <= 100:
            raise ValueError(f"confidence {self.confidence} outside 0..100")

    @property
    def verdict(self) -> Verdict:
        return to_binary(self.score)


@dataclass(frozen=True)
class GradingFailure:
    """An item whose judge reply could not be parsed; never coerced to a score."""

    question_id: str
    grader_id: str
    error: str
    raw_response: str = ""


def grade_answer(
    record,
    answer,
    gateway: Gateway,
    rubric: Rubric,
    mode: str = "plain",
    grader_model: str = "gpt-4",
) -> GradeScore | GradingFailure:
    """Render the grading prompt, query the judge at temperature 0, parse."""
    prompt = render_grading_prompt(
        question=record.question,
        label=record.label,
        answer=answer.answer_text,
        rubric=rubric,
        mode=mode,
    )
    req = ChatRequest(
        model_id=grader_model,
        messages=(Message("user", prompt),),
        temperature=0.0,
    )
    resp = gateway.complete(req)
    try:
        parsed = parse_grade(resp.text, mode)
    except GradeParseError as exc:
        return GradingFailure(
            question_id=record.question_id,
            grader_id=grader_model,
            error=str(exc),
            raw_response=resp.text,
        )
    return GradeScore(
        question_id=record.question_id,
        grader_id=grader_model,
        score=parsed.score,
        reason=parsed.reason,
        confidence=parsed.confidence,
        raw_response=resp.text,
        warnings=parsed.warnings,
    )
