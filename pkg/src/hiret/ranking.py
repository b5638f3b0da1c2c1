"""Child rescoring and parent-level aggregation.

Retrieved child chunks are re-ranked by embedding similarity, then collapsed
to unique parent documents. Two strategies are supported: deduplicating the
sorted child list (child_first) and re-embedding whole parent texts
(parent_rescore). All tie-breaks are ascending lexicographic id so runs are
byte-stable.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Mapping, MutableMapping, Sequence

import numpy as np

from .embedding import Embedder, cosine
from .index import ScoredCandidate

logger = logging.getLogger(__name__)

STRATEGIES = ("child_first", "parent_rescore")
DEFAULT_TOP_N = 5
DEFAULT_PARENT_TEXT_BUDGET = 6000


class MissingEmbeddingError(LookupError):
    """A candidate chunk has no embedding available for rescoring."""


class MissingParentTextError(LookupError):
    """A candidate's parent document text is not in the store."""


@dataclass
class RankingConfig:
    strategy: str = "child_first"
    top_n: int = DEFAULT_TOP_N
    rescorer: Embedder | None = None
    parent_text_budget: int = DEFAULT_PARENT_TEXT_BUDGET

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.top_n < 1:
            raise ValueError("top_n must be >= 1")


@dataclass(frozen=True)
class ParentHit:
    """One ranked parent with the candidate chunks that back it."""

    parent_id: str
    score: float
    chunk_ids: tuple[str, ...]


def _effective_score(candidate: ScoredCandidate) -> float:
    return candidate.rescored_score if candidate.rescored_score is not None else candidate.fused_score


def rescore_children(
    query_vec: np.ndarray,
    candidates: Sequence[ScoredCandidate],
    chunk_vectors: Mapping[str, np.ndarray],
) -> list[ScoredCandidate]:
    """Populate rescored_score = cosine(query, chunk) and re-sort.

    Returns a new list of the same length, sorted by rescored score
    descending with ascending chunk_id on ties.
    """
    rescored = []
    for candidate in candidates:
        if candidate.chunk_id not in chunk_vectors:
            raise MissingEmbeddingError(f"no embedding for chunk {candidate.chunk_id!r}")
        score = cosine(query_vec, chunk_vectors[candidate.chunk_id])
        rescored.append(replace(candidate, rescored_score=score))
    rescored.sort(key=lambda c: (-c.rescored_score, c.chunk_id))
    return rescored


def aggregate_max(candidates: Sequence[ScoredCandidate]) -> dict[str, tuple[float, str]]:
    """parent_id -> (max child score, argmax chunk_id).

    Uses the rescored score when populated, the fused score otherwise. Equal
    child scores resolve to the lower chunk_id.
    """
    best: dict[str, tuple[float, str]] = {}
    for candidate in candidates:
        score = _effective_score(candidate)
        current = best.get(candidate.parent_id)
        if current is None or score > current[0] or (score == current[0] and candidate.chunk_id < current[1]):
            best[candidate.parent_id] = (score, candidate.chunk_id)
    return best


def rank_parents_child_first(
    query_vec: np.ndarray,
    candidates: Sequence[ScoredCandidate],
    cfg: RankingConfig,
    chunk_vectors: Mapping[str, np.ndarray],
) -> list[ParentHit]:
    """Rescore children, then emit each parent at its best child's position.

    Equivalent to max-aggregating child scores per parent and sorting, but in
    a single walk over the rescored list. Stops after ``cfg.top_n`` distinct
    parents.
    """
    if not candidates:
        return []
    rescored = rescore_children(query_vec, candidates, chunk_vectors)
    chunks_of: dict[str, list[str]] = {}
    for candidate in rescored:
        chunks_of.setdefault(candidate.parent_id, []).append(candidate.chunk_id)
    hits: list[ParentHit] = []
    seen: set[str] = set()
    for candidate in rescored:
        if candidate.parent_id in seen:
            continue
        seen.add(candidate.parent_id)
        hits.append(
            ParentHit(
                parent_id=candidate.parent_id,
                score=candidate.rescored_score,
                chunk_ids=tuple(chunks_of[candidate.parent_id]),
            )
        )
        if len(hits) >= cfg.top_n:
            break
    return hits


def rank_parents_with_rescore(
    query_vec: np.ndarray,
    candidates: Sequence[ScoredCandidate],
    cfg: RankingConfig,
    parent_texts: Mapping[str, str],
    vector_cache: MutableMapping[str, np.ndarray] | None = None,
) -> list[ParentHit]:
    """Re-embed each unique candidate parent's full text and rank by cosine.

    Child scores only select the candidate parents; the final order comes
    entirely from parent-level similarity. Texts longer than
    ``cfg.parent_text_budget`` characters are truncated with a warning.
    ``vector_cache`` (parent_id -> vector) avoids re-embedding unchanged
    parents across queries; callers own cache/provider consistency.
    """
    if not candidates:
        return []
    if cfg.rescorer is None:
        raise ValueError("parent_rescore requires cfg.rescorer")

    chunks_of: dict[str, list[str]] = {}
    for candidate in candidates:
        chunks_of.setdefault(candidate.parent_id, []).append(candidate.chunk_id)
    parent_ids = sorted(chunks_of)

    to_embed: list[str] = []
    texts: list[str] = []
    for parent_id in parent_ids:
        if vector_cache is not None and parent_id in vector_cache:
            continue
        if parent_id not in parent_texts:
            raise MissingParentTextError(f"no stored text for parent {parent_id!r}")
        text = parent_texts[parent_id]
        if len(text) > cfg.parent_text_budget:
            logger.warning(
                "truncating parent %s from %d to %d chars for rescoring",
                parent_id, len(text), cfg.parent_text_budget,
            )
            text = text[: cfg.parent_text_budget]
        to_embed.append(parent_id)
        texts.append(text)

    fresh = dict(zip(to_embed, cfg.rescorer.embed(texts))) if texts else {}
    if vector_cache is not None:
        vector_cache.update(fresh)

    hits = []
    for parent_id in parent_ids:
        vec = vector_cache[parent_id] if vector_cache is not None else fresh[parent_id]
        hits.append(
            ParentHit(
                parent_id=parent_id,
                score=cosine(query_vec, vec),
                chunk_ids=tuple(sorted(chunks_of[parent_id])),
            )
        )
    hits.sort(key=lambda h: (-h.score, h.parent_id))
    return hits[: cfg.top_n]
