"""Embedding providers and cosine similarity.

Two providers share one interface: a deterministic offline hashing embedder
used by default (and by the whole test suite), and a client for a remote
embedding HTTP service standing in for hosted sentence-embedding models.
"""

from __future__ import annotations

import logging
import os
import re
from dataclasses import dataclass
from hashlib import blake2b
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_DIM = 256

# Unicode alphanumerics; underscore and everything else is a separator.
_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric characters."""
    return _TOKEN.findall(text.lower())


class ProviderError(RuntimeError):
    """A remote provider failed after the configured number of attempts."""

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


@dataclass
class EmbedderConfig:
    """Provider selection: ``hashing`` (offline) or ``remote`` (HTTP)."""

    kind: str = "hashing"
    dim: int = DEFAULT_DIM
    endpoint: str = ""
    model: str = ""
    api_key_env: str = "HIRET_EMBED_API_KEY"
    timeout: float = 30.0
    retries: int = 2

    def validate(self) -> None:
        if self.kind not in ("hashing", "remote"):
            raise ValueError(f"unknown embedder kind: {self.kind!r}")
        if self.dim < 8:
            raise ValueError("embedding dim must be >= 8")
        if self.kind == "remote" and (not self.endpoint or not self.model):
            raise ValueError("remote embedder requires a non-empty endpoint and model")


@runtime_checkable
class Embedder(Protocol):
    dim: int

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]: ...


class HashingEmbedder:
    """Deterministic bag-of-tokens embedder built on feature hashing.

    Each token is hashed with BLAKE2b (8-byte digest, a fixed published
    function, so results are bit-stable across platforms and runs). The
    bucket is the hash modulo ``dim`` and the sign comes from the top hash
    bit; signed token counts are accumulated and the vector L2-normalized.
    Texts with equal token bags therefore embed identically regardless of
    token order. Text with no tokens maps to the zero vector.
    """

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim < 8:
            raise ValueError("embedding dim must be >= 8")
        self.dim = dim

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        if not texts:
            raise ValueError("embed() requires at least one text")
        return [self._embed_one(text) for text in texts]

    def _embed_one(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in tokenize(text):
            h = int.from_bytes(blake2b(token.encode("utf-8"), digest_size=8).digest(), "big")
            sign = 1.0 if h & (1 << 63) == 0 else -1.0
            vec[h % self.dim] += sign
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            return vec
        return vec / norm


class RemoteEmbedder:
    """Client for an embedding service: POST ``{model, input}`` -> ``{embeddings}``.

    Transport and HTTP failures are retried up to ``config.retries`` times;
    the terminal ProviderError carries the attempt count. A response whose
    vectors do not match the configured dimension is a hard error, never
    retried.
    """

    def __init__(self, config: EmbedderConfig, session=None):
        config.validate()
        if config.kind != "remote":
            raise ValueError("RemoteEmbedder requires kind='remote'")
        self.config = config
        self.dim = config.dim
        if session is None:
            import requests

            session = requests.Session()
        self._session = session

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        if not texts:
            raise ValueError("embed() requires at least one text")
        payload = {"model": self.config.model, "input": list(texts)}
        headers = {}
        api_key = os.environ.get(self.config.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        attempts = 0
        last_error: Exception | None = None
        while attempts <= self.config.retries:
            attempts += 1
            try:
                response = self._session.post(
                    self.config.endpoint,
                    json=payload,
                    headers=headers,
                    timeout=self.config.timeout,
                )
                status = getattr(response, "status_code", 200)
                if status >= 400:
                    raise ProviderError(f"embedding endpoint returned HTTP {status}", attempts)
                body = response.json()
            except ProviderError as exc:
                last_error = exc
                logger.warning("embedding request failed (attempt %d): %s", attempts, exc)
                continue
            except Exception as exc:  # transport errors from the session
                last_error = exc
                logger.warning("embedding request failed (attempt %d): %s", attempts, exc)
                continue
            return self._parse_vectors(body, len(texts))
        raise ProviderError(f"embedding provider failed after {attempts} attempts: {last_error}", attempts)

    def _parse_vectors(self, body: dict, expected: int) -> list[np.ndarray]:
        vectors = body.get("embeddings")
        if not isinstance(vectors, list) or len(vectors) != expected:
            raise ValueError("embedding response must carry one vector per input text")
        out = []
        for vec in vectors:
            arr = np.asarray(vec, dtype=np.float64)
            if arr.ndim != 1 or arr.shape[0] != self.dim:
                raise ValueError(
                    f"embedding dimension mismatch: got {arr.shape}, configured dim={self.dim}"
                )
            # normalize on receipt so every provider honors the unit-or-zero contract
            norm = float(np.linalg.norm(arr))
            out.append(arr / norm if norm > 0.0 else arr)
        return out


def make_embedder(config: EmbedderConfig, session=None) -> Embedder:
    config.validate()
    if config.kind == "hashing":
        return HashingEmbedder(dim=config.dim)
    return RemoteEmbedder(config, session=session)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity in [-1, 1]; defined as 0.0 when either vector is zero."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return float(np.dot(a, b) / (norm_a * norm_b))
