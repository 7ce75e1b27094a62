"""Command-line entry point: ingest, answer, grade, report, human serve.

Exit codes are a stable contract for CI: 0 success, 1 validation error,
2 partial per-item failures. Commands refuse to overwrite existing outputs
unless --force is given.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import sys
from pathlib import Path

import click

from . import analytics, datastore
from .assets import template_checksums, template_text
from .chunking import ingest_corpus, load_corpus_dir
from .config import ConfigError, HarnessConfig, build_gateway, load_config
from .datastore import (
    ANSWERS_FILE,
    GRADES_FILE,
    REPORT_FILE,
    RUN_META_FILE,
    EvaluationRun,
    load_benchmark,
)
from .fixtures import write_fixture
from .grader import GradeScore, GradingFailure, Rubric, grade_answer
from .hnsw import HnswIndex
from .pipeline import answer_batch, utc_now_iso

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_PARTIAL = 2


def _fail(message: str, code: int = EXIT_VALIDATION) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_config(config_path: str | None, seed: int | None) -> HarnessConfig:
    try:
        cfg = load_config(config_path)
    except (ConfigError, ValueError) as exc:
        _fail(str(exc))
    if seed is not None:
        cfg = cfg.with_seed(seed)
    return cfg


def _refuse_existing(path: Path, force: bool) -> None:
    if path.exists():
        if not force:
            _fail(f"output already exists: {path} (use --force to overwrite)")
        if path.is_file():
            path.unlink()


def _write_run_meta(run_dir: Path, run_id: str, created_at: str, cfg: HarnessConfig) -> None:
    meta = {
        "run_id": run_id,
        "created_at": created_at,
        "config": cfg.resolved(),
        "templates": template_checksums(),
        # Generation prompt recorded verbatim for the audit trail.
        "answer_prompt": {
            "system": template_text("answer_system.txt"),
            "user": template_text("answer_user.txt"),
        },
    }
    (run_dir / RUN_META_FILE).write_text(
        json.dumps(meta, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool) -> None:
    """RAG answer-quality evaluation harness."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.option("--out-dir", required=True, type=click.Path(path_type=Path))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--n", "count", default=155, show_default=True, type=int)
def fixture(out_dir: Path, seed: int, count: int) -> None:
    """Generate the synthetic benchmark and corpus fixture."""
    benchmark_path, corpus_dir = write_fixture(out_dir, seed=seed, n=count)
    click.echo(f"benchmark: {benchmark_path}")
    click.echo(f"corpus: {corpus_dir}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--seed", type=int, default=None, help="Master seed override.")
@click.option("--force", is_flag=True)
def ingest(config_path, corpus_dir: Path, out_path: Path, seed, force: bool) -> None:
    """Chunk and embed a corpus directory into an index snapshot."""
    cfg = _load_config(config_path, seed)
    _refuse_existing(out_path, force)
    try:
        docs = load_corpus_dir(corpus_dir)
    except Exception as exc:
        _fail(str(exc))
    gateway = build_gateway(cfg.gateway, base_dir=Path(corpus_dir).parent)
    index = HnswIndex(dim=cfg.gateway.embed_dim, params=cfg.hnsw)
    try:
        count = ingest_corpus(docs, cfg.chunking, gateway.embed_texts, index)
    except Exception as exc:
        _fail(str(exc))
    index.freeze()
    index.save(out_path)
    click.echo(f"documents: {len(docs)}")
    click.echo(f"chunks: {count}")
    click.echo(f"entries: {count}")
    click.echo(f"snapshot: {out_path}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--benchmark", "benchmark_path", required=True, type=click.Path(path_type=Path))
@click.option("--index", "index_path", required=True, type=click.Path(path_type=Path))
@click.option("--run-dir", required=True, type=click.Path(path_type=Path))
@click.option("--run-id", default=None)
@click.option("--seed", type=int, default=None)
@click.option("--top-k", type=int, default=None)
@click.option("--timestamp", default=None, help="Pin run timestamp (ISO-8601).")
@click.option("--force", is_flag=True)
def answer(config_path, benchmark_path, index_path, run_dir: Path, run_id, seed,
           top_k, timestamp, force: bool) -> None:
    """Answer every benchmark question against an index snapshot."""
    cfg = _load_config(config_path, seed)
    if top_k is not None:
        cfg = dataclasses.replace(
            cfg, retrieval=dataclasses.replace(cfg.retrieval, top_k=top_k)
        )
    if timestamp is not None:
        cfg = dataclasses.replace(
            cfg, run=dataclasses.replace(cfg.run, timestamp=timestamp)
        )
    if not Path(index_path).exists():
        _fail(f"index snapshot not found: {index_path}")
    try:
        records = load_benchmark(benchmark_path)
    except datastore.DatastoreError as exc:
        _fail(str(exc))

    run_dir = Path(run_dir)
    answers_path = run_dir / ANSWERS_FILE
    _refuse_existing(answers_path, force)
    run_dir.mkdir(parents=True, exist_ok=True)

    created_at = cfg.run.timestamp or utc_now_iso()
    run_id = run_id or f"run-{created_at.replace(':', '').replace('+', 'Z')}"
    index = HnswIndex.load(index_path)
    gateway = build_gateway(cfg.gateway, base_dir=run_dir.parent)
    clock = (lambda: cfg.run.timestamp) if cfg.run.timestamp else utc_now_iso

    def progress(done: int, total: int) -> None:
        if done % 25 == 0 or done == total:
            click.echo(f"answered {done}/{total}", err=True)

    answers, failures = answer_batch(
        records,
        index,
        gateway,
        cfg.retrieval,
        generator_model=cfg.gateway.generator_model,
        now=clock,
        parallelism=cfg.run.parallelism,
        progress=progress,
    )
    datastore.write_jsonl(
        answers_path, (datastore.answer_to_dict(a) for a in answers)
    )
    _write_run_meta(run_dir, run_id, created_at, cfg)
    click.echo(f"answers: {len(answers)}/{len(records)}")
    for failure in failures:
        click.echo(f"failed: {failure}", err=True)
    if failures:
        sys.exit(EXIT_PARTIAL)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--benchmark", "benchmark_path", required=True, type=click.Path(path_type=Path))
@click.option("--run-dir", required=True, type=click.Path(path_type=Path))
@click.option("--mode", type=click.Choice(["plain", "confidence", "legacy"]), default=None)
@click.option("--grader-model", default=None)
@click.option("--seed", type=int, default=None)
@click.option("--force", is_flag=True)
def grade(config_path, benchmark_path, run_dir: Path, mode, grader_model, seed,
          force: bool) -> None:
    """Grade a run's answers with the judge model."""
    cfg = _load_config(config_path, seed)
    mode = mode or cfg.grading.mode
    grader_model = grader_model or cfg.gateway.grader_model
    run_dir = Path(run_dir)
    answers_path = run_dir / ANSWERS_FILE
    if not answers_path.exists():
        _fail(f"no answers in run dir: {answers_path}")
    grades_path = run_dir / GRADES_FILE
    _refuse_existing(grades_path, force)

    try:
        records = load_benchmark(benchmark_path)
        answers = datastore.load_answers(answers_path)
    except datastore.DatastoreError as exc:
        _fail(str(exc))
    by_id = {r.question_id: r for r in records}
    unknown = [a.question_id for a in answers if a.question_id not in by_id]
    if unknown:
        _fail(f"answers reference unknown questions: {unknown[:5]}")

    # Legacy mode pairs the early template with the early rubric wording.
    rubric = Rubric.legacy() if mode == "legacy" else Rubric.named(cfg.grading.rubric)
    gateway = build_gateway(cfg.gateway, base_dir=run_dir.parent)
    results: list[GradeScore | GradingFailure] = []
    failures = 0
    for ans in answers:
        result = grade_answer(
            by_id[ans.question_id], ans, gateway, rubric,
            mode=mode, grader_model=grader_model,
        )
        if isinstance(result, GradingFailure):
            failures += 1
        results.append(result)
    datastore.write_jsonl(grades_path, (datastore.grade_to_dict(g) for g in results))
    click.echo(f"grades: {len(results) - failures}/{len(results)}")
    if failures:
        click.echo(f"grading failures: {failures}", err=True)
        sys.exit(EXIT_PARTIAL)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--run-dir", required=True, type=click.Path(path_type=Path))
@click.option("--compare", "compare_path", type=click.Path(path_type=Path), default=None,
              help="Second grades.jsonl to compare against.")
@click.option("--aggregate", "plan", type=click.Choice(["median", "sample", "two-phase"]),
              default=None)
@click.option("--grader-a", default=None, help="Primary grader id.")
@click.option("--seed", type=int, default=None)
@click.option("--force", is_flag=True)
def report(config_path, run_dir: Path, compare_path, plan, grader_a, seed,
           force: bool) -> None:
    """Compute agreement statistics and figure data for a graded run."""
    cfg = _load_config(config_path, seed)
    plan = plan or cfg.aggregation.plan
    run_dir = Path(run_dir)
    grades_path = run_dir / GRADES_FILE
    if not grades_path.exists():
        _fail(f"no grades in run dir: {grades_path}")
    report_path = run_dir / REPORT_FILE
    _refuse_existing(report_path, force)

    try:
        grades = datastore.load_grades(grades_path)
        if compare_path is not None:
            grades = grades + datastore.load_grades(compare_path)
        answers = datastore.load_answers(run_dir / ANSWERS_FILE)
    except datastore.DatastoreError as exc:
        _fail(str(exc))
    question_ids = [a.question_id for a in answers]

    scored = [g for g in grades if isinstance(g, GradeScore)]
    failed = [g for g in grades if isinstance(g, GradingFailure)]
    if not scored:
        _fail("grade set is empty; nothing to report")
    try:
        matrix = analytics.GradeMatrix.from_grades(question_ids, scored)
    except analytics.AnalyticsError as exc:
        _fail(str(exc))

    if grader_a is None:
        grader_a = matrix.graders[0]
    elif grader_a not in matrix.graders:
        _fail(f"grader {grader_a!r} has no grades")
    others = [g for g in matrix.graders if g != grader_a]

    columns: dict[str, list[int | None]] = {
        g: matrix.column(g) for g in matrix.graders
    }
    grader_b = None
    if len(others) == 1:
        grader_b = others[0]
    elif len(others) > 1:
        grader_b = f"merged[{plan}]"
        columns[grader_b] = analytics.aggregate_scores(
            matrix,
            plan,
            graders=others,
            seed=cfg.aggregation.sample_seed,
            first_phase_items=cfg.aggregation.first_phase_items,
        )

    agreement = analytics.build_report(
        question_ids,
        columns,
        grader_a=grader_a if grader_b else None,
        grader_b=grader_b,
    )
    doc = agreement.to_dict()
    doc["grader_a"] = grader_a
    doc["grader_b"] = grader_b
    doc["failures"] = len(failed)
    report_path.write_text(
        json.dumps(doc, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )
    analytics.write_report_csv(run_dir / "report.csv", question_ids, columns)
    analytics.write_distribution_csv(
        run_dir / "distribution.csv", agreement.distributions
    )
    with_confidence = [g for g in scored if g.confidence is not None]
    if with_confidence:
        analytics.write_heatmap_csv(
            run_dir / "heatmap.csv", analytics.confidence_heatmap(with_confidence)
        )

    click.echo(f"graders: {', '.join(matrix.graders)}")
    if agreement.binary_agreement is not None:
        click.echo(f"per-level agreement: {doc['per_level_agreement_pct']}")
        click.echo(f"binary agreement: {doc['binary_agreement_pct']}")
    else:
        click.echo("single grader: distributions only")
    for grader, rate in agreement.reject_rates.items():
        click.echo(f"reject rate [{grader}]: {analytics.format_percent(rate)}")
    click.echo(f"report: {report_path}")


@main.group()
def human() -> None:
    """Human annotation workflows."""


@human.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--benchmark", "benchmark_path", required=True, type=click.Path(path_type=Path))
@click.option("--run-dir", required=True, type=click.Path(path_type=Path))
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
def serve(config_path, benchmark_path, run_dir: Path, host, port) -> None:
    """Serve the grading UI and annotation API for a run."""
    import uvicorn

    from .service import create_app, store_for_run

    cfg = _load_config(config_path, None)
    if not cfg.annotation.graders:
        _fail("no graders registered in [annotation] config")
    try:
        records = load_benchmark(benchmark_path)
        answers = datastore.load_answers(Path(run_dir) / ANSWERS_FILE)
    except datastore.DatastoreError as exc:
        _fail(str(exc))
    rubric = Rubric.named(cfg.grading.rubric)
    store = store_for_run(records, answers, cfg.annotation.graders, run_dir, rubric)
    app = create_app(store)
    uvicorn.run(
        app,
        host=host or cfg.annotation.host,
        port=port or cfg.annotation.port,
        log_level="info",
    )


if __name__ == "__main__":
    main()
