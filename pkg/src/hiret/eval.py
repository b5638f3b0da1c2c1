"""Retrieval metrics (nDCG@k, Recall@k), TREC-style file IO, and the
configuration sweep over hybrid weight, ranking strategy, and candidate size."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .index import HybridConfig
from .ranking import RankingConfig

logger = logging.getLogger(__name__)

DEFAULT_CUTOFFS = (1, 3, 5)
DEFAULT_ALPHAS = (0.5, 0.7, 0.9)
DEFAULT_KS = (20, 30, 50)
# parent-rescoring block enumerates first
DEFAULT_STRATEGIES = ("parent_rescore", "child_first")

STRATEGY_TO_RANK_PARENTS = {"child_first": False, "parent_rescore": True}

SWEEP_HEADER = "alpha,rank_parents,k,ndcg@1,ndcg@3,ndcg@5,recall@1,recall@3,recall@5"
_SWEEP_METRICS = ("ndcg@1", "ndcg@3", "ndcg@5", "recall@1", "recall@3", "recall@5")

Qrels = dict[str, dict[str, int]]
RunFile = dict[str, list[tuple[str, float]]]


def _gain(rel: int, mode: str) -> float:
    if mode == "exp":
        return float(2 ** rel - 1)
    if mode == "linear":
        return float(rel)
    raise ValueError(f"gain must be 'exp' or 'linear', got {mode!r}")


def ndcg_at_k(ranking: Sequence[str], rels: Mapping[str, int], k: int, gain: str = "exp") -> float:
    """Normalized discounted cumulative gain at cutoff k.

    DCG sums gain(rel_i) / log2(i + 1) over the top k ranked documents
    (1-indexed ranks); the ideal DCG sorts the judged grades descending and
    applies the same cutoff, so an ideally ordered ranking scores 1.0 at
    every k. Gain is 2^rel - 1 by default or the raw grade with
    gain='linear' (identical on binary grades). Unjudged documents count as
    grade 0, and a query with no relevant documents scores 0.0.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    dcg = 0.0
    for i, doc_id in enumerate(ranking[:k]):
        dcg += _gain(rels.get(doc_id, 0), gain) / math.log2(i + 2)
    ideal = sorted(rels.values(), reverse=True)[:k]
    idcg = 0.0
    for i, grade in enumerate(ideal):
        idcg += _gain(grade, gain) / math.log2(i + 2)
    if idcg == 0.0:
        return 0.0
    return dcg / idcg


def recall_at_k(ranking: Sequence[str], rels: Mapping[str, int], k: int) -> float:
    """Fraction of relevant (grade > 0) documents found in the top k;
    0.0 when the query has no relevant documents."""
    if k < 1:
        raise ValueError("k must be >= 1")
    relevant = {doc_id for doc_id, grade in rels.items() if grade > 0}
    if not relevant:
        return 0.0
    found = sum(1 for doc_id in ranking[:k] if doc_id in relevant)
    return found / len(relevant)


@dataclass
class EvalReport:
    per_query: dict[str, dict[str, float]]
    means: dict[str, float]
    ignored_queries: int = 0
    config: dict | None = None


def evaluate_run(
    run: RunFile,
    qrels: Qrels,
    cutoffs: Sequence[int] = DEFAULT_CUTOFFS,
    gain: str = "exp",
    config: dict | None = None,
) -> EvalReport:
    """Score a run against qrels at the given cutoffs.

    Every query present in the qrels contributes to the means; a query the
    run missed scores 0 across the board rather than being skipped, so
    silent retrieval failures show up. Queries in the run but absent from
    the qrels are ignored and counted in ``ignored_queries``.
    """
    shared = [qid for qid in qrels if qid in run]
    if not shared:
        raise ValueError("run and qrels share no query ids")
    per_query: dict[str, dict[str, float]] = {}
    for qid, rels in qrels.items():
        ranking = [doc_id for doc_id, _ in run.get(qid, [])]
        metrics: dict[str, float] = {}
        for k in cutoffs:
            metrics[f"ndcg@{k}"] = ndcg_at_k(ranking, rels, k, gain=gain)
            metrics[f"recall@{k}"] = recall_at_k(ranking, rels, k)
        per_query[qid] = metrics
    names = [f"{m}@{k}" for m in ("ndcg", "recall") for k in cutoffs]
    means = {
        name: sum(per_query[qid][name] for qid in qrels) / len(qrels) for name in names
    }
    ignored = sum(1 for qid in run if qid not in qrels)
    return EvalReport(per_query=per_query, means=means, ignored_queries=ignored, config=config)


def read_qrels(path: str | Path) -> Qrels:
    """TREC qrels: whitespace-delimited ``query_id 0 doc_id grade`` lines."""
    qrels: Qrels = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            qid, _, doc_id, grade_str = parts
            try:
                grade = int(grade_str)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: grade must be an integer") from exc
            if grade < 0:
                raise ValueError(f"{path}:{lineno}: grade must be >= 0")
            qrels.setdefault(qid, {})[doc_id] = grade
    if not qrels:
        raise ValueError(f"{path}: no qrels lines found")
    return qrels


def read_run_file(path: str | Path) -> RunFile:
    """TREC run: ``query_id Q0 doc_id rank score tag`` lines.

    Rankings are ordered by score descending (rank, then doc_id, break
    ties); a duplicate document within one query keeps its best-scored
    occurrence with a warning.
    """
    raw: dict[str, list[tuple[str, float, int]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 6:
                raise ValueError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
            qid, _, doc_id, rank_str, score_str, _tag = parts
            try:
                rank = int(rank_str)
                score = float(score_str)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad rank or score") from exc
            raw.setdefault(qid, []).append((doc_id, score, rank))
    run: RunFile = {}
    for qid, entries in raw.items():
        entries.sort(key=lambda e: (-e[1], e[2], e[0]))
        seen: set[str] = set()
        ranking: list[tuple[str, float]] = []
        for doc_id, score, _rank in entries:
            if doc_id in seen:
                logger.warning("%s: duplicate doc %s for query %s dropped", path, doc_id, qid)
                continue
            seen.add(doc_id)
            ranking.append((doc_id, score))
        run[qid] = ranking
    if not run:
        raise ValueError(f"{path}: no run lines found")
    return run


def write_run_file(path: str | Path, run: RunFile, tag: str = "hiret") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for qid, ranking in run.items():
            for rank, (doc_id, score) in enumerate(ranking, 1):
                fh.write(f"{qid} Q0 {doc_id} {rank} {score:.6f} {tag}\n")


def read_queries(path: str | Path) -> dict[str, str]:
    """Tab-separated queries file: ``query_id<TAB>query text`` per line."""
    queries: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'query_id<TAB>text'")
            qid, text = line.split("\t", 1)
            if not qid or not text.strip():
                raise ValueError(f"{path}:{lineno}: empty query_id or text")
            queries[qid] = text
    if not queries:
        raise ValueError(f"{path}: no queries found")
    return queries


@dataclass
class SweepRow:
    alpha: float
    rank_parents: bool
    k: int
    metrics: dict[str, float] | None = None
    error: str | None = None


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)
    best_index: int | None = None

    @property
    def best_row(self) -> SweepRow | None:
        return self.rows[self.best_index] if self.best_index is not None else None


def run_sweep(
    pipeline,
    queries: Mapping[str, str],
    qrels: Qrels,
    alphas: Sequence[float] = DEFAULT_ALPHAS,
    strategies: Sequence[str] = DEFAULT_STRATEGIES,
    ks: Sequence[int] = DEFAULT_KS,
    top_n: int = 5,
    gain: str = "exp",
) -> SweepResult:
    """Evaluate every (strategy, alpha, k) configuration on the same index.

    The default grid is 2 strategies x 3 alphas x 3 candidate sizes = 18
    rows, enumerated strategy-first with the parent-rescoring block leading.
    A configuration that fails is recorded in its row and the sweep
    continues. The best row (highest mean ndcg@5, first on ties) is flagged
    via ``best_index``.
    """
    result = SweepResult()
    for strategy in strategies:
        if strategy not in STRATEGY_TO_RANK_PARENTS:
            raise ValueError(f"unknown strategy {strategy!r}")
        for alpha in alphas:
            for k in ks:
                row = SweepRow(alpha=alpha, rank_parents=STRATEGY_TO_RANK_PARENTS[strategy], k=k)
                try:
                    run: RunFile = {}
                    for qid, text in queries.items():
                        hits = pipeline.rank(
                            text,
                            hybrid=HybridConfig(alpha=alpha, k=k),
                            ranking=RankingConfig(strategy=strategy, top_n=top_n),
                        )
                        run[qid] = [(h.parent_id, h.score) for h in hits]
                    report = evaluate_run(
                        run, qrels, cutoffs=DEFAULT_CUTOFFS, gain=gain,
                        config={"alpha": alpha, "strategy": strategy, "k": k},
                    )
                    row.metrics = report.means
                except Exception as exc:
                    logger.warning(
                        "sweep row (alpha=%s, strategy=%s, k=%s) failed: %s",
                        alpha, strategy, k, exc,
                    )
                    row.error = str(exc)
                result.rows.append(row)
    best: tuple[float, int] | None = None
    for i, row in enumerate(result.rows):
        if row.metrics is None:
            continue
        score = row.metrics["ndcg@5"]
        if best is None or score > best[0]:
            best = (score, i)
    result.best_index = best[1] if best else None
    return result


def format_sweep_table(result: SweepResult) -> str:
    """Render the sweep as CSV with the fixed 9-column header; failed rows
    carry ``nan`` metric cells."""
    lines = [SWEEP_HEADER]
    for row in result.rows:
        if row.metrics is None:
            cells = ["nan"] * len(_SWEEP_METRICS)
        else:
            cells = [f"{row.metrics[name]:.4f}" for name in _SWEEP_METRICS]
        prefix = f"{row.alpha:g},{str(row.rank_parents).lower()},{row.k}"
        lines.append(prefix + "," + ",".join(cells))
    return "\n".join(lines) + "\n"
