"""Hierarchical parent-child retrieval pipeline.

Documents are split into overlapping sentence-window child chunks for
retrieval while the full documents are kept as parents for generation
context. Query-time flow: conversational rewrite, hybrid BM25 + dense
search over child chunks, embedding rescoring, max-score aggregation onto
parents, grounded generation. Evaluation tooling covers nDCG/Recall against
TREC-style qrels plus a configuration sweep harness.
"""

from .config import PipelineConfig, load_config
from .conversation import (
    ABSTENTION_RESPONSE,
    Conversation,
    ConversationState,
    GroundedAnswer,
    StubGenerationProvider,
    StubRewriteProvider,
    RemoteTextProvider,
    TextProviderConfig,
    generate_answer,
    render_generation_prompt,
    render_rewrite_prompt,
    replay_conversations,
    rewrite_query,
    run_turn,
)
from .corpus import (
    ChildChunk,
    CorpusStats,
    CorpusStore,
    Document,
    DuplicateDocumentError,
    SentenceSpan,
    UnchunkableDocumentError,
    chunk_document,
    ingest_corpus,
    read_corpus_file,
    split_sentences,
)
from .embedding import (
    EmbedderConfig,
    HashingEmbedder,
    ProviderError,
    RemoteEmbedder,
    cosine,
    make_embedder,
    tokenize,
)
from .eval import (
    EvalReport,
    evaluate_run,
    format_sweep_table,
    ndcg_at_k,
    read_qrels,
    read_run_file,
    recall_at_k,
    run_sweep,
    write_run_file,
)
from .index import (
    DenseIndex,
    HybridConfig,
    ScoredCandidate,
    SparseIndex,
    fuse_candidates,
    load_snapshot,
    save_snapshot,
    search_hybrid,
)
from .pipeline import Pipeline
from .ranking import (
    ParentHit,
    RankingConfig,
    aggregate_max,
    rank_parents_child_first,
    rank_parents_with_rescore,
    rescore_children,
)

__version__ = "0.1.0"

__all__ = [
    "ABSTENTION_RESPONSE",
    "ChildChunk",
    "Conversation",
    "ConversationState",
    "CorpusStats",
    "CorpusStore",
    "DenseIndex",
    "Document",
    "DuplicateDocumentError",
    "EmbedderConfig",
    "EvalReport",
    "GroundedAnswer",
    "HashingEmbedder",
    "HybridConfig",
    "ParentHit",
    "Pipeline",
    "PipelineConfig",
    "ProviderError",
    "RankingConfig",
    "RemoteEmbedder",
    "RemoteTextProvider",
    "ScoredCandidate",
    "SentenceSpan",
    "SparseIndex",
    "StubGenerationProvider",
    "StubRewriteProvider",
    "TextProviderConfig",
    "UnchunkableDocumentError",
    "aggregate_max",
    "chunk_document",
    "cosine",
    "evaluate_run",
    "format_sweep_table",
    "fuse_candidates",
    "generate_answer",
    "ingest_corpus",
    "load_config",
    "load_snapshot",
    "make_embedder",
    "ndcg_at_k",
    "rank_parents_child_first",
    "rank_parents_with_rescore",
    "read_corpus_file",
    "read_qrels",
    "read_run_file",
    "recall_at_k",
    "render_generation_prompt",
    "render_rewrite_prompt",
    "replay_conversations",
    "rescore_children",
    "rewrite_query",
    "run_sweep",
    "run_turn",
    "save_snapshot",
    "search_hybrid",
    "split_sentences",
    "tokenize",
    "write_run_file",
]
