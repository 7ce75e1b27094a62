"""ragmark: a RAG answer-quality evaluation harness.

Vanilla retrieval-augmented QA over an HNSW chunk index, rubric-based grading
by LLM judges or human annotators, and grader-agreement analytics.
"""

from .analytics import (
    AgreementReport,
    GradeMatrix,
    agreement_rate,
    binary_agreement_rate,
    confidence_heatmap,
    format_fraction,
    format_percent,
    median_vote,
    reject_rate,
    sample_vote,
    score_distribution,
)
from .chunking import Chunk, ChunkingConfig, SourceDocument, chunk_document, ingest_corpus
from .config import HarnessConfig, build_gateway, load_config
from .datastore import BenchmarkRecord, EvaluationRun, load_benchmark, load_run, save_run
from .gateway import (
    ChatRequest,
    ChatResponse,
    DeterministicEmbedder,
    EmbedRequest,
    EmbedResponse,
    Gateway,
    Message,
    OpenAICompatBackend,
    ReplayBackend,
    SyntheticBackend,
    request_hash,
)
from .grader import (
    GradeScore,
    GradingFailure,
    Rubric,
    Verdict,
    grade_answer,
    parse_grade,
    render_grading_prompt,
    to_binary,
)
from .hnsw import HnswIndex, HnswParams, VectorEntry, exhaustive_search, squared_l2
from .pipeline import GeneratedAnswer, RetrievalConfig, answer_question, build_context

__version__ = "0.1.0"
