"""Corpus ingestion: sentence splitting, sliding-window child chunks, parent storage.

Documents are kept whole as parents while retrieval operates over small
overlapping child chunks. Every chunk carries a link back to its parent so
scores can be aggregated at the document level later in the pipeline.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 3
DEFAULT_STRIDE = 2

_OPENING_QUOTES = "\"'“‘"
_TERMINATOR = re.compile(r"[.!?](?=\s)")


class UnchunkableDocumentError(ValueError):
    """Document text is empty or whitespace-only, so no sentences exist."""


class DuplicateDocumentError(ValueError):
    """The same doc_id was ingested twice into one corpus."""


class MalformedRecordError(ValueError):
    """A corpus record is missing required fields or carries empty ones."""


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    title: str | None = None


@dataclass(frozen=True)
class SentenceSpan:
    """Half-open character range [start, end) of one sentence, 0-indexed."""

    index: int
    start: int
    end: int


@dataclass(frozen=True)
class ChildChunk:
    """A window of consecutive sentences; sentence_range is inclusive."""

    chunk_id: str
    parent_id: str
    first_sentence: int
    last_sentence: int
    text: str


@dataclass
class CorpusStats:
    docs: int = 0
    chunks: int = 0
    skipped: int = 0


def split_sentences(text: str) -> list[SentenceSpan]:
    """Split text into ordered, non-overlapping sentence spans.

    A boundary is a terminator (``.``, ``!``, ``?``) followed by whitespace
    whose next non-whitespace character is an uppercase letter, a digit, or an
    opening quote; end-of-text always closes the final sentence. Spans are
    trimmed to non-whitespace characters, so the text between consecutive
    spans (and before/after the outermost ones) is whitespace only. There is
    no abbreviation handling: "Dr. Smith" splits into two sentences.
    """
    if not text.strip():
        raise UnchunkableDocumentError("document text is empty or whitespace-only")

    breaks: list[int] = []
    for match in _TERMINATOR.finditer(text):
        follow = text[match.end():].lstrip()
        if follow and (follow[0].isupper() or follow[0].isdigit() or follow[0] in _OPENING_QUOTES):
            breaks.append(match.end())

    spans: list[SentenceSpan] = []
    cursor = 0
    for end in [*breaks, len(text)]:
        segment = text[cursor:end]
        lead = len(segment) - len(segment.lstrip())
        trail = len(segment) - len(segment.rstrip())
        start, stop = cursor + lead, end - trail
        if stop > start:
            spans.append(SentenceSpan(index=len(spans), start=start, end=stop))
        cursor = end
    return spans


def chunk_document(
    doc: Document,
    window: int = DEFAULT_WINDOW,
    stride: int = DEFAULT_STRIDE,
) -> list[ChildChunk]:
    """Build overlapping child chunks with a sliding sentence window.

    Windows start at sentence 0, stride, 2*stride, ... and cover up to
    ``window`` consecutive sentences each. A trailing window whose sentence
    set is contained in the previously emitted one is dropped, so no chunk
    duplicates content already fully indexed. Chunk text is the exact
    substring of the parent from the first sentence's start to the last
    sentence's end.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    if not 1 <= stride <= window:
        raise ValueError("stride must satisfy 1 <= stride <= window")

    spans = split_sentences(doc.text)
    n = len(spans)
    chunks: list[ChildChunk] = []
    prev_end = -1
    for start in range(0, n, stride):
        end = min(start + window, n)
        if end <= prev_end:
            continue
        chunks.append(
            ChildChunk(
                chunk_id=f"{doc.doc_id}#{start}",
                parent_id=doc.doc_id,
                first_sentence=start,
                last_sentence=end - 1,
                text=doc.text[spans[start].start:spans[end - 1].end],
            )
        )
        prev_end = end
    return chunks


class CorpusStore:
    """Parent documents plus the child-chunk registry.

    Writable during ingest, then treated as immutable: query-time code only
    reads. Chunk order is (document input order, window start).
    """

    def __init__(self) -> None:
        self._documents: dict[str, Document] = {}
        self._chunks: list[ChildChunk] = []
        self._chunks_by_id: dict[str, ChildChunk] = {}

    def __len__(self) -> int:
        return len(self._documents)

    @property
    def documents(self) -> list[Document]:
        return list(self._documents.values())

    @property
    def chunks(self) -> list[ChildChunk]:
        return list(self._chunks)

    def document(self, doc_id: str) -> Document:
        return self._documents[doc_id]

    def chunk(self, chunk_id: str) -> ChildChunk:
        return self._chunks_by_id[chunk_id]

    def parent_links(self) -> dict[str, str]:
        """chunk_id -> parent doc_id for every registered chunk."""
        return {c.chunk_id: c.parent_id for c in self._chunks}

    def parent_texts(self) -> dict[str, str]:
        return {doc_id: doc.text for doc_id, doc in self._documents.items()}

    def add_document(
        self,
        doc: Document,
        window: int = DEFAULT_WINDOW,
        stride: int = DEFAULT_STRIDE,
    ) -> list[ChildChunk]:
        if not doc.doc_id or not doc.doc_id.strip():
            raise MalformedRecordError("document has an empty doc_id")
        if doc.doc_id in self._documents:
            raise DuplicateDocumentError(f"duplicate doc_id: {doc.doc_id!r}")
        chunks = chunk_document(doc, window=window, stride=stride)
        self._documents[doc.doc_id] = doc
        for chunk in chunks:
            self._chunks.append(chunk)
            self._chunks_by_id[chunk.chunk_id] = chunk
        return chunks

    @classmethod
    def from_parts(cls, documents: Iterable[Document], chunks: Iterable[ChildChunk]) -> "CorpusStore":
        """Rebuild a store from previously persisted parts, without re-chunking."""
        store = cls()
        for doc in documents:
            if doc.doc_id in store._documents:
                raise DuplicateDocumentError(f"duplicate doc_id: {doc.doc_id!r}")
            store._documents[doc.doc_id] = doc
        for chunk in chunks:
            if chunk.parent_id not in store._documents:
                raise ValueError(f"chunk {chunk.chunk_id!r} references unknown parent {chunk.parent_id!r}")
            store._chunks.append(chunk)
            store._chunks_by_id[chunk.chunk_id] = chunk
        return store


def ingest_corpus(
    records: Iterable[Document | None],
    window: int = DEFAULT_WINDOW,
    stride: int = DEFAULT_STRIDE,
) -> tuple[CorpusStore, CorpusStats]:
    """Ingest a stream of documents into a fresh store.

    ``None`` entries (unparseable file records) and documents that fail
    validation or sentence splitting are skipped with a warning and counted
    in ``stats.skipped``. A duplicate doc_id is a hard error.
    """
    store = CorpusStore()
    stats = CorpusStats()
    saw_record = False
    for record in records:
        saw_record = True
        if record is None:
            stats.skipped += 1
            continue
        try:
            chunks = store.add_document(record, window=window, stride=stride)
        except (UnchunkableDocumentError, MalformedRecordError) as exc:
            logger.warning("skipping document %r: %s", getattr(record, "doc_id", "?"), exc)
            stats.skipped += 1
            continue
        stats.docs += 1
        stats.chunks += len(chunks)
    if not saw_record:
        raise ValueError("corpus stream yielded no records")
    return store, stats


def read_corpus_file(path: str | Path) -> Iterator[Document | None]:
    """Yield documents from a JSONL corpus file.

    Each line is one JSON object with required ``document_id`` and ``text``
    string fields and an optional ``title``. Blank lines are ignored. Lines
    that fail to parse or validate yield ``None`` so the caller can count
    them as skipped.
    """
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                logger.warning("%s:%d: invalid JSON (%s)", path, lineno, exc)
                yield None
                continue
            doc_id = obj.get("document_id") if isinstance(obj, dict) else None
            text = obj.get("text") if isinstance(obj, dict) else None
            if not isinstance(doc_id, str) or not isinstance(text, str):
                logger.warning("%s:%d: record needs string document_id and text", path, lineno)
                yield None
                continue
            title = obj.get("title")
            yield Document(doc_id=doc_id, text=text, title=title if isinstance(title, str) else None)
