"""Multi-grader score aggregation and agreement statistics.

Agreement is raw (uncorrected) fractional agreement, computed pairwise over
items where both graders produced a score; items with a missing or failed
grade are excluded from denominators and counted separately. Percentages in
report text round half-up to one decimal and drop a trailing ".0" (so 128/155
renders as "82.6%" and 124/155 as "80%"); machine output keeps full precision.
"""

from __future__ import annotations

import csv
import hashlib
import random
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .grader import GradeScore, to_binary

SCORE_LEVELS = (1, 2, 3, 4, 5)
CONFIDENCE_BUCKET_WIDTH = 10
AGGREGATION_PLANS = ("median", "sample", "two-phase")


class AnalyticsError(Exception):
    pass


def _check_scores(scores: Iterable[int]) -> list[int]:
    out = []
    for s in scores:
        if not isinstance(s, int) or isinstance(s, bool) or not 1 <= s <= 5:
            raise AnalyticsError(f"score must be an integer in 1..5, got {s!r}")
        out.append(s)
    return out


def median_vote(scores: Sequence[int]) -> int:
    """Median of the scores; the lower median when the count is even, so the
    result stays on the integer rubric scale."""
    checked = _check_scores(scores)
    if not checked:
        raise AnalyticsError("median_vote of empty score list")
    ordered = sorted(checked)
    return ordered[(len(ordered) - 1) // 2]


def item_rng(seed: int, question_id: str) -> random.Random:
    """Per-item RNG derived from (seed, question_id); order-independent."""
    digest = hashlib.sha256(f"{seed}:{question_id}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def sample_vote(
    scores_by_grader: Mapping[str, int], rng: random.Random
) -> tuple[int, str]:
    """Pick one grader's score uniformly at random (seeded via ``rng``)."""
    graders = sorted(g for g, s in scores_by_grader.items() if s is not None)
    if not graders:
        raise AnalyticsError("sample_vote with no grades present")
    chosen = graders[rng.randrange(len(graders))]
    score = scores_by_grader[chosen]
    _check_scores([score])
    return score, chosen


def _aligned(
    a: Sequence[int | None], b: Sequence[int | None]
) -> list[tuple[int, int]]:
    if len(a) != len(b):
        raise AnalyticsError(f"length mismatch: {len(a)} vs {len(b)}")
    pairs = [(x, y) for x, y in zip(a, b) if x is not None and y is not None]
    if not pairs:
        raise AnalyticsError("no comparable positions (all pairs have a missing grade)")
    return pairs


def agreement_rate(a: Sequence[int | None], b: Sequence[int | None]) -> float:
    """Fraction of aligned positions where both graders gave the same level."""
    pairs = _aligned(a, b)
    for x, y in pairs:
        _check_scores([x, y])
    return sum(1 for x, y in pairs if x == y) / len(pairs)


def binary_agreement_rate(a: Sequence[int | None], b: Sequence[int | None]) -> float:
    """Agreement after mapping each score to its accept/reject verdict."""
    pairs = _aligned(a, b)
    return sum(1 for x, y in pairs if to_binary(x) == to_binary(y)) / len(pairs)


@dataclass(frozen=True)
class ScoreHistogram:
    counts: dict[int, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def fractions(self) -> dict[int, float]:
        total = self.total
        return {
            n: (self.counts[n] / total if total else 0.0) for n in SCORE_LEVELS
        }


def score_distribution(scores: Iterable[int]) -> ScoreHistogram:
    counts = {n: 0 for n in SCORE_LEVELS}
    for s in _check_scores(scores):
        counts[s] += 1
    return ScoreHistogram(counts=counts)


def reject_rate(scores: Sequence[int]) -> float:
    """Fraction of scores mapping to the reject verdict (levels 1-3)."""
    checked = _check_scores(scores)
    if not checked:
        raise AnalyticsError("reject_rate of empty score list")
    return sum(1 for s in checked if to_binary(s).name == "REJECT") / len(checked)


def confidence_bucket(confidence: int) -> tuple[int, int]:
    """Width-10 bucket over [0, 100]; 100 folds into the [90, 100] bucket."""
    if not 0 <= confidence <= 100:
        raise AnalyticsError(f"confidence {confidence} outside 0..100")
    low = min(confidence // CONFIDENCE_BUCKET_WIDTH, 9) * CONFIDENCE_BUCKET_WIDTH
    return (low, low + CONFIDENCE_BUCKET_WIDTH)


def confidence_heatmap(grades: Sequence[GradeScore]) -> dict[tuple[int, int], int]:
    """Joint counts keyed by (score, confidence-bucket low edge)."""
    for g in grades:
        if g.confidence is None:
            raise AnalyticsError(
                f"grade for {g.question_id} has no confidence; heatmap undefined"
            )
    table: dict[tuple[int, int], int] = {}
    for g in grades:
        key = (g.score, confidence_bucket(g.confidence)[0])
        table[key] = table.get(key, 0) + 1
    return table


def format_percent(value: float) -> str:
    """Report-style rendering: half-up to one decimal, trailing .0 dropped."""
    q = (Decimal(repr(value)) * 100).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)
    text = str(q)
    if text.endswith(".0"):
        text = text[:-2]
    return f"{text}%"


def format_fraction(numerator: int, denominator: int) -> str:
    """Exact-rational variant of :func:`format_percent` for match counts."""
    if denominator <= 0:
        raise AnalyticsError("denominator must be positive")
    q = (Decimal(numerator) * 100 / Decimal(denominator)).quantize(
        Decimal("0.1"), rounding=ROUND_HALF_UP
    )
    text = str(q)
    if text.endswith(".0"):
        text = text[:-2]
    return f"{text}%"


@dataclass
class GradeMatrix:
    """Scores laid out per (question, grader); missing cells are None."""

    question_ids: list[str]
    graders: list[str]
    cells: dict[str, dict[str, int]] = field(default_factory=dict)

    @classmethod
    def from_grades(
        cls, question_ids: Sequence[str], grades: Iterable[GradeScore]
    ) -> "GradeMatrix":
        known = set(question_ids)
        cells: dict[str, dict[str, int]] = {}
        graders: list[str] = []
        for g in grades:
            if g.question_id not in known:
                raise AnalyticsError(f"grade references unknown question {g.question_id!r}")
            row = cells.setdefault(g.question_id, {})
            if g.grader_id in row:
                raise AnalyticsError(
                    f"duplicate grade for ({g.question_id}, {g.grader_id})"
                )
            row[g.grader_id] = g.score
            if g.grader_id not in graders:
                graders.append(g.grader_id)
        return cls(question_ids=list(question_ids), graders=graders, cells=cells)

    def column(self, grader: str) -> list[int | None]:
        return [self.cells.get(q, {}).get(grader) for q in self.question_ids]

    def row(self, question_id: str) -> dict[str, int]:
        return dict(self.cells.get(question_id, {}))


def aggregate_scores(
    matrix: GradeMatrix,
    plan: str,
    graders: Sequence[str] | None = None,
    seed: int = 0,
    first_phase_items: int = 52,
) -> list[int | None]:
    """Merge several graders' columns into one vector per the named plan.

    ``median``:    lower-median vote per item over the graders present.
    ``sample``:    per-item uniform pick among present graders, seeded.
    ``two-phase``: the split protocol, median vote over the first
                   ``first_phase_items`` items and seeded sampling afterwards.
    """
    if plan not in AGGREGATION_PLANS:
        raise AnalyticsError(f"unknown aggregation plan {plan!r}")
    use = list(graders) if graders is not None else list(matrix.graders)
    merged: list[int | None] = []
    for i, qid in enumerate(matrix.question_ids):
        row = {g: s for g, s in matrix.row(qid).items() if g in use}
        if not row:
            merged.append(None)
            continue
        if plan == "median" or (plan == "two-phase" and i < first_phase_items):
            merged.append(median_vote(list(row.values())))
        else:
            score, _ = sample_vote(row, item_rng(seed, qid))
            merged.append(score)
    return merged


@dataclass
class AgreementReport:
    """Per-level and binary agreement between two aligned graders, with
    per-grader score distributions and reject rates."""

    n_items: int
    excluded: int
    per_level_agreement: float | None
    binary_agreement: float | None
    level_matches: int | None
    binary_matches: int | None
    compared: int
    distributions: dict[str, ScoreHistogram]
    reject_rates: dict[str, float]

    def to_dict(self) -> dict:
        doc: dict = {
            "n_items": self.n_items,
            "excluded": self.excluded,
            "compared": self.compared,
            "distributions": {
                g: {"counts": h.counts, "fractions": h.fractions}
                for g, h in self.distributions.items()
            },
            "reject_rates": self.reject_rates,
        }
        if self.per_level_agreement is not None:
            doc["per_level_agreement"] = self.per_level_agreement
            doc["per_level_agreement_pct"] = format_fraction(
                self.level_matches, self.compared
            )
        if self.binary_agreement is not None:
            doc["binary_agreement"] = self.binary_agreement
            doc["binary_agreement_pct"] = format_fraction(
                self.binary_matches, self.compared
            )
        return doc


def build_report(
    question_ids: Sequence[str],
    columns: Mapping[str, Sequence[int | None]],
    grader_a: str | None = None,
    grader_b: str | None = None,
) -> AgreementReport:
    """Distributions for every column; agreement stats when a pair is named."""
    distributions = {}
    rejects = {}
    for grader, col in columns.items():
        present = [s for s in col if s is not None]
        distributions[grader] = score_distribution(present)
        rejects[grader] = reject_rate(present) if present else 0.0

    per_level = binary = None
    level_matches = binary_matches = None
    compared = 0
    excluded = 0
    if grader_a is not None and grader_b is not None:
        a, b = columns[grader_a], columns[grader_b]
        pairs = _aligned(a, b)
        compared = len(pairs)
        excluded = len(question_ids) - compared
        level_matches = sum(1 for x, y in pairs if x == y)
        binary_matches = sum(1 for x, y in pairs if to_binary(x) == to_binary(y))
        per_level = level_matches / compared
        binary = binary_matches / compared

    return AgreementReport(
        n_items=len(question_ids),
        excluded=excluded,
        per_level_agreement=per_level,
        binary_agreement=binary,
        level_matches=level_matches,
        binary_matches=binary_matches,
        compared=compared,
        distributions=distributions,
        reject_rates=rejects,
    )


def write_report_csv(
    path: Path | str,
    question_ids: Sequence[str],
    columns: Mapping[str, Sequence[int | None]],
) -> None:
    """Per-item aligned scores and verdicts, one row per question."""
    graders = list(columns)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["question_id"]
            + [f"score_{g}" for g in graders]
            + [f"verdict_{g}" for g in graders]
        )
        for i, qid in enumerate(question_ids):
            scores = [columns[g][i] for g in graders]
            verdicts = [
                to_binary(s).label if s is not None else "" for s in scores
            ]
            writer.writerow([qid] + ["" if s is None else s for s in scores] + verdicts)


def write_distribution_csv(
    path: Path | str, distributions: Mapping[str, ScoreHistogram]
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["grader", "score", "count", "fraction"])
        for grader in distributions:
            hist = distributions[grader]
            for level in SCORE_LEVELS:
                writer.writerow(
                    [grader, level, hist.counts[level], hist.fractions[level]]
                )


def write_heatmap_csv(path: Path | str, table: Mapping[tuple[int, int], int]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["score", "confidence_low", "confidence_high", "count"])
        for (score, low), count in sorted(table.items()):
            writer.writerow([score, low, low + CONFIDENCE_BUCKET_WIDTH, count])
