"""Wires the corpus store, embedders, and indices into one retrieval handle."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterable

import numpy as np

from .corpus import CorpusStats, CorpusStore, Document, ingest_corpus
from .embedding import Embedder, HashingEmbedder
from .index import (
    DEFAULT_B,
    DEFAULT_K1,
    DenseIndex,
    HybridConfig,
    ScoredCandidate,
    SparseIndex,
    Snapshot,
    load_snapshot,
    save_snapshot,
    search_hybrid,
)
from .ranking import (
    ParentHit,
    RankingConfig,
    rank_parents_child_first,
    rank_parents_with_rescore,
)

logger = logging.getLogger(__name__)


class Pipeline:
    """Query-side entry point over an ingested, indexed corpus.

    Immutable after construction; concurrent reads are safe. The optional
    ``rescorer`` defaults to the indexing embedder, in which case rescoring
    reuses the already-indexed chunk vectors instead of re-embedding.
    """

    def __init__(
        self,
        store: CorpusStore,
        sparse: SparseIndex,
        dense: DenseIndex,
        embedder: Embedder,
        rescorer: Embedder | None = None,
        hybrid: HybridConfig | None = None,
        ranking: RankingConfig | None = None,
        include_title: bool = False,
    ):
        self.store = store
        self.sparse = sparse
        self.dense = dense
        self.embedder = embedder
        self.rescorer = rescorer if rescorer is not None else embedder
        self.hybrid = hybrid or HybridConfig()
        self.ranking = ranking or RankingConfig()
        self.include_title = include_title
        self._parent_of = store.parent_links()
        self._parent_vec_cache: dict[str, np.ndarray] = {}

    @classmethod
    def build(
        cls,
        records: Iterable[Document | None],
        window: int = 3,
        stride: int = 2,
        embedder: Embedder | None = None,
        rescorer: Embedder | None = None,
        hybrid: HybridConfig | None = None,
        ranking: RankingConfig | None = None,
        include_title: bool = False,
    ) -> tuple["Pipeline", CorpusStats]:
        """Ingest documents, embed every chunk, and build both indices."""
        embedder = embedder or HashingEmbedder()
        store, stats = ingest_corpus(records, window=window, stride=stride)
        chunks = store.chunks
        if chunks:
            texts = [cls._embed_text(store, c.parent_id, c.text, include_title) for c in chunks]
            vectors = dict(zip((c.chunk_id for c in chunks), embedder.embed(texts)))
        else:
            vectors = {}
        dense = DenseIndex.build(vectors, dim=embedder.dim)
        sparse = SparseIndex.build((c.chunk_id, c.text) for c in chunks)
        pipeline = cls(
            store, sparse, dense, embedder,
            rescorer=rescorer, hybrid=hybrid, ranking=ranking, include_title=include_title,
        )
        return pipeline, stats

    @staticmethod
    def _embed_text(store: CorpusStore, parent_id: str, text: str, include_title: bool) -> str:
        if include_title:
            title = store.document(parent_id).title
            if title:
                return f"{title}\n{text}"
        return text

    def parent_text(self, parent_id: str) -> str:
        return self.store.document(parent_id).text

    def search_children(self, query: str, hybrid: HybridConfig | None = None) -> list[ScoredCandidate]:
        cfg = hybrid or self.hybrid
        query_vec = self.embedder.embed([query])[0]
        return search_hybrid(query, query_vec, self.sparse, self.dense, self._parent_of, cfg)

    def rank(
        self,
        query: str,
        hybrid: HybridConfig | None = None,
        ranking: RankingConfig | None = None,
    ) -> list[ParentHit]:
        """Retrieve, rescore, and aggregate to the top-n parent documents."""
        hybrid_cfg = hybrid or self.hybrid
        ranking_cfg = ranking or self.ranking
        rescorer = ranking_cfg.rescorer or self.rescorer
        query_vec = self.embedder.embed([query])[0]
        candidates = search_hybrid(
            query, query_vec, self.sparse, self.dense, self._parent_of, hybrid_cfg
        )
        if not candidates:
            return []
        rescore_vec = query_vec if rescorer is self.embedder else rescorer.embed([query])[0]

        if ranking_cfg.strategy == "child_first":
            if rescorer is self.embedder:
                chunk_vectors = {c.chunk_id: self.dense.vector(c.chunk_id) for c in candidates}
            else:
                texts = [
                    self._embed_text(
                        self.store, c.parent_id, self.store.chunk(c.chunk_id).text, self.include_title
                    )
                    for c in candidates
                ]
                chunk_vectors = dict(zip((c.chunk_id for c in candidates), rescorer.embed(texts)))
            return rank_parents_child_first(rescore_vec, candidates, ranking_cfg, chunk_vectors)

        effective_cfg = ranking_cfg
        if effective_cfg.rescorer is None:
            effective_cfg = RankingConfig(
                strategy=ranking_cfg.strategy,
                top_n=ranking_cfg.top_n,
                rescorer=rescorer,
                parent_text_budget=ranking_cfg.parent_text_budget,
            )
        # The cache assumes one rescorer and one truncation budget per pipeline.
        cache = None
        if rescorer is self.rescorer and effective_cfg.parent_text_budget == self.ranking.parent_text_budget:
            cache = self._parent_vec_cache
        return rank_parents_with_rescore(
            rescore_vec, candidates, effective_cfg, self.store.parent_texts(), vector_cache=cache
        )

    def save(self, path: str | Path, extra_meta: dict | None = None) -> None:
        meta = {
            "embedder_kind": type(self.embedder).__name__,
            "dim": self.embedder.dim,
            "k1": self.sparse.k1,
            "b": self.sparse.b,
            "include_title": self.include_title,
        }
        if extra_meta:
            meta.update(extra_meta)
        save_snapshot(path, self.store, self.dense, meta=meta)

    @classmethod
    def load(
        cls,
        path: str | Path,
        embedder: Embedder | None = None,
        rescorer: Embedder | None = None,
        hybrid: HybridConfig | None = None,
        ranking: RankingConfig | None = None,
    ) -> "Pipeline":
        """Open a snapshot read-only. The query embedder must match the
        snapshot's vector dimension."""
        snap: Snapshot = load_snapshot(path)
        dim = snap.dense.dim
        if embedder is None:
            embedder = HashingEmbedder(dim=dim)
        if embedder.dim != dim:
            raise ValueError(
                f"embedder dim {embedder.dim} does not match snapshot dim {dim}"
            )
        expected_kind = snap.meta.get("embedder_kind")
        if expected_kind and expected_kind != type(embedder).__name__:
            logger.warning(
                "snapshot was built with %s but queries will use %s",
                expected_kind, type(embedder).__name__,
            )
        return cls(
            snap.store, snap.sparse, snap.dense, embedder,
            rescorer=rescorer, hybrid=hybrid, ranking=ranking,
            include_title=bool(snap.meta.get("include_title", False)),
        )
