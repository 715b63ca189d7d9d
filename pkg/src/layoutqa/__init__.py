"""Layout-aware long-context retrieval-augmented QA for structured documents.

The library side of the package; see the ``demos/`` scripts in the source
tree for narrative walkthroughs of each capability, and ``layoutqa --help``
for the command-line workflows.
"""

__version__ = "0.1.0"

from .chunking import (
    ChildChunk,
    ChunkSet,
    ParentChunk,
    build_child_chunks,
    build_footnote_chunks,
    build_parent_chunks,
    chunk_layout,
    chunk_naive,
    sentence_spans,
)
from .evaluation import (
    Claim,
    CoverageReport,
    EvalRecord,
    compute_recall,
    coverage_score,
    coverage_score_from_counts,
    evaluate_dataset,
    extract_claims,
    judge_coverage,
)
from .layout import Footnote, LayoutElement, Section, parse_layout, segment_sections, word_count
from .pipeline import AnswerRecord, PipelineConfig, answer, cot_filter, extract_global, generate_answer
from .providers import (
    HttpChat,
    HttpEmbedder,
    MockChat,
    MockEmbedder,
    MockRule,
    ProviderConfig,
    ProviderSet,
)
from .retrieval import (
    Ranking,
    RetrievalBundle,
    RetrievalResult,
    build_indexes,
    expand_and_enrich,
    fuse_rrf,
    retrieve,
    score_bm25,
    search_dense,
    tokenize,
)
from .rewriter import QuerySet, RewritePair, filter_rewrite_pairs, export_training_pairs, rewrite
from .store import load_store, persist_store
from .synthgen import (
    ClusterAssignment,
    PageSummary,
    QAPair,
    cluster_summaries,
    generate_qa,
    kmeans,
    sample_cluster_chunks,
    summarize_pages,
    synthesize,
)
from .templates import TemplateStore, render_template
