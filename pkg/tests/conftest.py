"""Shared builders for synthetic corpora, queries, and conversation sets."""

from __future__ import annotations

import json
import random
from pathlib import Path

import pytest

from hiret import Document, HashingEmbedder, Pipeline

WORDS = [
    "river", "stone", "cloud", "forest", "meadow", "harbor", "lantern", "bridge",
    "valley", "ember", "garden", "signal", "thread", "copper", "saddle", "mirror",
    "anchor", "timber", "breeze", "canyon", "furnace", "hollow", "ladder", "marble",
    "needle", "orchard", "pebble", "quarry", "ribbon", "shelter", "tunnel", "willow",
]


def planted_query(i: int) -> str:
    """The query that targets document i's planted marker tokens."""
    return f"marker{i:04d} topic{i:04d}"


def synthetic_documents(n_docs: int, seed: int = 7) -> list[Document]:
    """Filler-sentence documents, each planted with two doc-unique tokens."""
    rng = random.Random(seed)
    docs = []
    for i in range(n_docs):
        n_sentences = rng.randint(3, 6)
        sentences = []
        for _ in range(n_sentences):
            words = rng.choices(WORDS, k=rng.randint(4, 8))
            sentences.append(" ".join(words).capitalize() + ".")
        sentences[n_sentences // 2] = (
            f"Keyword marker{i:04d} relates to topic{i:04d} "
            f"since marker{i:04d} defines topic{i:04d}."
        )
        docs.append(Document(doc_id=f"doc{i:04d}", text=" ".join(sentences), title=f"Doc {i}"))
    return docs


def planted_queries(docs: list[Document]) -> dict[str, tuple[str, str]]:
    """query_id -> (query text, the one relevant doc_id)."""
    queries = {}
    for i, doc in enumerate(docs):
        queries[f"q{i:04d}"] = (planted_query(i), doc.doc_id)
    return queries


def divergent_documents() -> list[Document]:
    """A corpus where the dense and sparse winners differ for one query.

    For the query "apple banana cherry zebra": doc_sparse holds the rare
    token zebra among common filler, doc_dense shares three of the four
    query tokens and little else. BM25 prefers doc_sparse (high-idf zebra),
    cosine prefers doc_dense (bag overlap).
    """
    filler = "River stone cloud forest meadow harbor lantern bridge valley ember garden signal."
    docs = [
        Document("doc_sparse", "Zebra " + filler[0].lower() + filler[1:]),
        Document("doc_dense", "Apple banana cherry durian."),
    ]
    for i in range(8):
        docs.append(
            Document(
                f"doc_bg{i}",
                f"Apple banana cherry are common here. {filler}",
            )
        )
    return docs


def write_corpus_file(path: Path, docs: list[Document]) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            record = {"document_id": doc.doc_id, "text": doc.text}
            if doc.title:
                record["title"] = doc.title
            fh.write(json.dumps(record) + "\n")
    return path


def write_qrels_file(path: Path, qrels: dict[str, dict[str, int]]) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        for qid, rels in qrels.items():
            for doc_id, grade in rels.items():
                fh.write(f"{qid} 0 {doc_id} {grade}\n")
    return path


def write_queries_file(path: Path, queries: dict[str, str]) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        for qid, text in queries.items():
            fh.write(f"{qid}\t{text}\n")
    return path


def make_conversations(docs: list[Document], n_conversations: int, seed: int = 11) -> list[dict]:
    """Conversation dicts whose user turns target distinct planted markers."""
    rng = random.Random(seed)
    conversations = []
    doc_index = 0
    for c in range(n_conversations):
        n_turns = rng.randint(1, 3)
        turns = []
        for _ in range(n_turns):
            i = doc_index % len(docs)
            doc_index += 1
            turns.append({"role": "user", "text": planted_query(i)})
            turns.append({"role": "assistant", "text": f"gold answer about doc{i:04d}"})
        conversations.append({"conversation_id": f"conv{c:03d}", "turns": turns})
    return conversations


@pytest.fixture(scope="session")
def small_pipeline() -> Pipeline:
    docs = synthetic_documents(12, seed=3)
    pipeline, stats = Pipeline.build(docs, embedder=HashingEmbedder())
    assert stats.docs == 12
    return pipeline
