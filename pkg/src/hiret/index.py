"""Sparse (BM25) and dense (vector) indices over child chunks, plus hybrid fusion.

Both indices are write-once at ingest and immutable afterwards. Dense search
is exact brute force; at desk scale a full scan beats the bookkeeping of an
approximate structure and doubles as its own ground truth.
"""

from __future__ import annotations

import gzip
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import ChildChunk, CorpusStore, Document
from .embedding import tokenize

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75

SNAPSHOT_FORMAT = "hiret-index"
SNAPSHOT_VERSION = 1


class SnapshotError(ValueError):
    """Snapshot file is missing, corrupt, or from an unsupported version."""


@dataclass
class HybridConfig:
    """Hybrid weighting: ``alpha`` is the dense share, ``k`` the per-leg budget."""

    alpha: float = 0.7
    k: int = 50

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass
class ScoredCandidate:
    chunk_id: str
    parent_id: str
    sparse_score: float
    dense_score: float
    fused_score: float
    rescored_score: float | None = None


class SparseIndex:
    """Okapi BM25 inverted index over child chunks.

    idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)), non-negative for every
    1 <= df <= N. A chunk's score sums, over query tokens,

        idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len/avgdl))

    with k1 = 1.2 and b = 0.75 by default.
    """

    def __init__(self, k1: float = DEFAULT_K1, b: float = DEFAULT_B):
        self.k1 = k1
        self.b = b
        self.postings: dict[str, list[tuple[str, int]]] = {}
        self.doc_len: dict[str, int] = {}
        self.n_docs = 0
        self.avgdl = 0.0

    @classmethod
    def build(
        cls,
        chunks: Iterable[tuple[str, str]],
        k1: float = DEFAULT_K1,
        b: float = DEFAULT_B,
    ) -> "SparseIndex":
        """Index (chunk_id, text) pairs. Postings are sorted by chunk_id so the
        index is identical regardless of build order."""
        index = cls(k1=k1, b=b)
        postings: dict[str, dict[str, int]] = {}
        for chunk_id, text in chunks:
            tokens = tokenize(text)
            index.doc_len[chunk_id] = len(tokens)
            counts: dict[str, int] = {}
            for token in tokens:
                counts[token] = counts.get(token, 0) + 1
            for term, tf in counts.items():
                postings.setdefault(term, {})[chunk_id] = tf
        index.postings = {
            term: sorted(chunk_tfs.items()) for term, chunk_tfs in sorted(postings.items())
        }
        index.n_docs = len(index.doc_len)
        total = sum(index.doc_len.values())
        index.avgdl = total / index.n_docs if index.n_docs else 0.0
        return index

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))

    def search(self, query: str, limit: int) -> list[tuple[str, float]]:
        """Top ``limit`` chunks by BM25, descending, ties by ascending chunk_id.
        Zero-score chunks are omitted; a query with no indexed terms returns []."""
        if limit < 1:
            raise ValueError("limit must be >= 1")
        terms = tokenize(query)
        if not terms or self.n_docs == 0 or self.avgdl == 0.0:
            return []
        scores: dict[str, float] = {}
        for term in terms:
            plist = self.postings.get(term)
            if not plist:
                continue
            term_idf = self.idf(term)
            for chunk_id, tf in plist:
                dl = self.doc_len[chunk_id]
                denom = tf + self.k1 * (1.0 - self.b + self.b * dl / self.avgdl)
                scores[chunk_id] = scores.get(chunk_id, 0.0) + term_idf * tf * (self.k1 + 1.0) / denom
        ranked = sorted(
            ((cid, score) for cid, score in scores.items() if score > 0.0),
            key=lambda item: (-item[1], item[0]),
        )
        return ranked[:limit]


class DenseIndex:
    """Exact cosine-similarity search over chunk embeddings.

    Rows are stored in ascending chunk_id order, which both makes the index
    independent of build order and lets a stable sort implement the
    ascending-chunk_id tie-break for free.
    """

    def __init__(self, chunk_ids: list[str], matrix: np.ndarray):
        self.chunk_ids = chunk_ids
        self.matrix = matrix
        self._norms = np.linalg.norm(matrix, axis=1) if len(chunk_ids) else np.zeros(0)
        self._row_of = {cid: i for i, cid in enumerate(chunk_ids)}

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return len(self.chunk_ids)

    @classmethod
    def build(cls, vectors: Mapping[str, np.ndarray], dim: int | None = None) -> "DenseIndex":
        ids = sorted(vectors)
        if not ids:
            if dim is None:
                raise ValueError("dim is required to build an empty dense index")
            return cls([], np.zeros((0, dim), dtype=np.float64))
        rows = []
        for cid in ids:
            vec = np.asarray(vectors[cid], dtype=np.float64)
            if vec.ndim != 1:
                raise ValueError(f"vector for {cid!r} is not 1-dimensional")
            if dim is None:
                dim = vec.shape[0]
            if vec.shape[0] != dim:
                raise ValueError(f"vector for {cid!r} has dim {vec.shape[0]}, expected {dim}")
            rows.append(vec)
        return cls(ids, np.vstack(rows))

    def vector(self, chunk_id: str) -> np.ndarray:
        return self.matrix[self._row_of[chunk_id]]

    def __contains__(self, chunk_id: str) -> bool:
        return chunk_id in self._row_of

    def search(self, query_vec: np.ndarray, limit: int) -> list[tuple[str, float]]:
        """Exact top ``limit`` by cosine, descending, ties by ascending chunk_id."""
        if limit < 1:
            raise ValueError("limit must be >= 1")
        query_vec = np.asarray(query_vec, dtype=np.float64)
        if query_vec.shape != (self.dim,):
            raise ValueError(f"query dim {query_vec.shape} does not match index dim {self.dim}")
        if not self.chunk_ids:
            return []
        qnorm = float(np.linalg.norm(query_vec))
        denom = self._norms * qnorm
        raw = self.matrix @ query_vec
        scores = np.divide(raw, denom, out=np.zeros_like(raw), where=denom > 0.0)
        order = np.argsort(-scores, kind="stable")[:limit]
        return [(self.chunk_ids[i], float(scores[i])) for i in order]


def minmax_normalize(scores: Sequence[float]) -> list[float]:
    """Map scores to [0, 1]; a constant (or singleton) list maps to all ones."""
    if not scores:
        return []
    lo, hi = min(scores), max(scores)
    if hi == lo:
        return [1.0] * len(scores)
    return [(s - lo) / (hi - lo) for s in scores]


def fuse_candidates(
    sparse_hits: Sequence[tuple[str, float]],
    dense_hits: Sequence[tuple[str, float]],
    parent_of: Mapping[str, str],
    cfg: HybridConfig,
) -> list[ScoredCandidate]:
    """Fuse two leg result lists by relative (min-max) score interpolation.

    Each leg is normalized over its own returned candidates; a candidate
    missing from a leg contributes 0.0 for that leg. The fused score is
    ``alpha * dense_norm + (1 - alpha) * sparse_norm``, so it always lands in
    [0, 1]. Results are sorted by fused score descending with ascending
    chunk_id breaking ties, then truncated to ``cfg.k``.
    """
    raw_sparse = dict(sparse_hits)
    raw_dense = dict(dense_hits)
    sparse_norm = dict(zip(raw_sparse, minmax_normalize([s for _, s in sparse_hits])))
    dense_norm = dict(zip(raw_dense, minmax_normalize([s for _, s in dense_hits])))

    fused: list[ScoredCandidate] = []
    for chunk_id in sorted(set(raw_sparse) | set(raw_dense)):
        d = dense_norm.get(chunk_id, 0.0)
        s = sparse_norm.get(chunk_id, 0.0)
        fused.append(
            ScoredCandidate(
                chunk_id=chunk_id,
                parent_id=parent_of[chunk_id],
                sparse_score=raw_sparse.get(chunk_id, 0.0),
                dense_score=raw_dense.get(chunk_id, 0.0),
                fused_score=cfg.alpha * d + (1.0 - cfg.alpha) * s,
            )
        )
    fused.sort(key=lambda c: (-c.fused_score, c.chunk_id))
    return fused[: cfg.k]


def search_hybrid(
    query: str,
    query_vec: np.ndarray,
    sparse: SparseIndex,
    dense: DenseIndex,
    parent_of: Mapping[str, str],
    cfg: HybridConfig,
) -> list[ScoredCandidate]:
    """Run both legs with a per-leg budget of ``cfg.k`` and fuse the results."""
    sparse_hits = sparse.search(query, cfg.k)
    dense_hits = dense.search(query_vec, cfg.k)
    return fuse_candidates(sparse_hits, dense_hits, parent_of, cfg)


def save_snapshot(
    path: str | Path,
    store: CorpusStore,
    dense: DenseIndex,
    meta: dict | None = None,
) -> None:
    """Persist corpus and dense vectors as a versioned gzip-JSON snapshot.

    The sparse index is not stored; it is rebuilt deterministically from the
    chunk texts on load. Output bytes are stable across runs (sorted keys,
    zeroed gzip mtime).
    """
    chunks = store.chunks
    payload = {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "meta": meta or {},
        "documents": [
            {"doc_id": d.doc_id, "text": d.text, "title": d.title} for d in store.documents
        ],
        "chunks": [
            {
                "chunk_id": c.chunk_id,
                "parent_id": c.parent_id,
                "first": c.first_sentence,
                "last": c.last_sentence,
                "text": c.text,
            }
            for c in chunks
        ],
        "dim": dense.dim,
        "vectors": {cid: dense.vector(cid).tolist() for cid in dense.chunk_ids},
    }
    data = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    # filename="" and mtime=0 keep the gzip header, and thus the file bytes,
    # identical across runs and output paths
    with open(path, "wb") as fh:
        with gzip.GzipFile(filename="", fileobj=fh, mode="wb", mtime=0) as gz:
            gz.write(data)


@dataclass
class Snapshot:
    store: CorpusStore
    sparse: SparseIndex
    dense: DenseIndex
    meta: dict = field(default_factory=dict)


def load_snapshot(path: str | Path) -> Snapshot:
    """Load a snapshot written by :func:`save_snapshot`, read-only."""
    try:
        with gzip.open(path, "rb") as fh:
            payload = json.loads(fh.read().decode("utf-8"))
    except FileNotFoundError:
        raise
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SnapshotError(f"cannot read snapshot {path}: {exc}") from exc
    if payload.get("format") != SNAPSHOT_FORMAT:
        raise SnapshotError(f"not an index snapshot: {path}")
    if payload.get("version") != SNAPSHOT_VERSION:
        raise SnapshotError(
            f"unsupported snapshot version {payload.get('version')!r} (expected {SNAPSHOT_VERSION})"
        )
    documents = [
        Document(doc_id=d["doc_id"], text=d["text"], title=d.get("title"))
        for d in payload["documents"]
    ]
    chunks = [
        ChildChunk(
            chunk_id=c["chunk_id"],
            parent_id=c["parent_id"],
            first_sentence=c["first"],
            last_sentence=c["last"],
            text=c["text"],
        )
        for c in payload["chunks"]
    ]
    store = CorpusStore.from_parts(documents, chunks)
    meta = payload.get("meta", {})
    sparse = SparseIndex.build(
        ((c.chunk_id, c.text) for c in chunks),
        k1=meta.get("k1", DEFAULT_K1),
        b=meta.get("b", DEFAULT_B),
    )
    vectors = {cid: np.asarray(vec, dtype=np.float64) for cid, vec in payload["vectors"].items()}
    dense = DenseIndex.build(vectors, dim=payload["dim"])
    return Snapshot(store=store, sparse=sparse, dense=dense, meta=meta)
