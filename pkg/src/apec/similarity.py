"""Lexical and semantic similarity metrics and the combined scores.

BoW vectors are raw term counts over lowercased alphanumeric runs of
length >= 2 (no stopword removal). Embeddings come from a pluggable
provider; an HTTP client for OpenAI-style /embeddings endpoints and a
deterministic hash-based stub are provided.
"""

from __future__ import annotations

import hashlib
import logging
import math
import re
import threading
import time
from collections import Counter
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import requests

from .errors import (
    DimensionMismatchError,
    EmptyTextError,
    ProviderUnavailableError,
)

logger = logging.getLogger(__name__)

BowVector = dict[str, int]
EmbeddingVector = list[float]

_BOW_TOKEN = re.compile(r"[^\W_]{2,}", re.UNICODE)


def bow_vector(text: str) -> BowVector:
    """Term-count vector: lowercased alphanumeric runs of length >= 2."""
    return dict(Counter(_BOW_TOKEN.findall(text.lower())))


def cosine(a, b) -> float:
    """Cosine similarity between two sparse (mapping) or dense vectors.

    Returns 0.0 when either vector has zero norm. Dense vectors must
    have equal length.
    """
    if isinstance(a, Mapping) and isinstance(b, Mapping):
        dot = sum(value * b[term] for term, value in a.items() if term in b)
        norm_a = math.sqrt(sum(v * v for v in a.values()))
        norm_b = math.sqrt(sum(v * v for v in b.values()))
    elif isinstance(a, Sequence) and isinstance(b, Sequence):
        if len(a) != len(b):
            raise DimensionMismatchError(
                f"dense vectors differ in length: {len(a)} vs {len(b)}"
            )
        dot = sum(x * y for x, y in zip(a, b))
        norm_a = math.sqrt(sum(x * x for x in a))
        norm_b = math.sqrt(sum(y * y for y in b))
    else:
        raise TypeError("cosine expects two mappings or two sequences")
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return dot / (norm_a * norm_b)


def combined_score(fh: float, emb_sim: float) -> float:
    """In-loop gating score: mean of FH and cosine scaled to 0-100."""
    return (fh + 100.0 * emb_sim) / 2.0


def table_average(fh: float, bow_sim: float, emb_sim: float) -> float:
    """Reporting average over FH and both similarities scaled to 0-100."""
    return (fh + 100.0 * bow_sim + 100.0 * emb_sim) / 3.0


@dataclass(frozen=True)
class MetricReport:
    fh: float
    bow_sim: float
    emb_sim: float
    combined: float
    table_avg: float

    @classmethod
    def from_scores(cls, fh: float, bow_sim: float, emb_sim: float) -> "MetricReport":
        return cls(
            fh=fh,
            bow_sim=bow_sim,
            emb_sim=emb_sim,
            combined=combined_score(fh, emb_sim),
            table_avg=table_average(fh, bow_sim, emb_sim),
        )


@runtime_checkable
class EmbeddingProvider(Protocol):
    """Anything that maps a batch of texts to fixed-dimension vectors."""

    provider_id: str

    def embed(self, texts: list[str]) -> list[EmbeddingVector]: ...


def embed_text(text: str, provider: EmbeddingProvider) -> EmbeddingVector:
    """Embed one text through the given provider."""
    if not text.strip():
        raise EmptyTextError("cannot embed empty text")
    return provider.embed([text])[0]


class HashEmbeddingProvider:
    """Deterministic stand-in embedder (no model, no network).

    Each text hashes to a fixed unit vector, so identical texts always
    have similarity 1.0 and distinct texts are near-orthogonal for
    moderate dimensions. Suitable for dry runs and tests only.
    """

    def __init__(self, dim: int = 32):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.provider_id = f"hash:{dim}"

    def embed(self, texts: list[str]) -> list[EmbeddingVector]:
        return [self._one(text) for text in texts]

    def _one(self, text: str) -> EmbeddingVector:
        raw = text.encode("utf-8")
        values: list[float] = []
        block = 0
        while len(values) < self.dim:
            digest = hashlib.sha256(raw + b"\x00" + block.to_bytes(4, "big")).digest()
            for k in range(0, len(digest) - 3, 4):
                if len(values) >= self.dim:
                    break
                word = int.from_bytes(digest[k : k + 4], "big")
                values.append(word / 2**31 - 1.0)
            block += 1
        norm = math.sqrt(sum(v * v for v in values))
        if norm == 0.0:  # astronomically unlikely; keep the contract anyway
            values[0] = 1.0
            norm = 1.0
        return [v / norm for v in values]


class HttpEmbeddingProvider:
    """Client for an OpenAI-compatible embeddings endpoint.

    POSTs {"model": ..., "input": [...]} and reads
    {"data": [{"embedding": [...]}, ...]}. Connection errors, 429 and
    5xx responses are retried with exponential backoff.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str = "",
        timeout: float = 120.0,
        retries: int = 3,
        backoff: float = 0.5,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.provider_id = f"http:{endpoint}:{model}"
        self._session = requests.Session()

    def embed(self, texts: list[str]) -> list[EmbeddingVector]:
        payload = {"model": self.model, "input": texts}
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                response = self._session.post(
                    self.endpoint, json=payload, headers=headers, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = exc
                logger.warning("embedding request failed (attempt %d): %s", attempt + 1, exc)
                continue
            if response.status_code == 200:
                return self._parse(response, len(texts))
            last_error = ProviderUnavailableError(
                f"embedding endpoint returned HTTP {response.status_code}"
            )
            if response.status_code not in (429,) and response.status_code < 500:
                raise last_error
            logger.warning(
                "embedding endpoint HTTP %d (attempt %d)", response.status_code, attempt + 1
            )
        raise ProviderUnavailableError(
            f"embedding provider unreachable after {self.retries + 1} attempts: {last_error}"
        )

    @staticmethod
    def _parse(response, expected: int) -> list[EmbeddingVector]:
        try:
            data = response.json()["data"]
            vectors = [None] * len(data)
            for i, item in enumerate(data):
                vectors[item.get("index", i)] = [float(v) for v in item["embedding"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProviderUnavailableError(f"malformed embeddings response: {exc}") from exc
        if len(vectors) != expected or any(v is None for v in vectors):
            raise ProviderUnavailableError(
                f"embedding count mismatch: sent {expected}, got {len(vectors)}"
            )
        return vectors


class CachedEmbeddingProvider:
    """Caches another provider's vectors by (provider id, exact text).

    Safe under concurrent use; repeat texts are served from the cache
    instead of hitting the upstream provider again.
    """

    def __init__(self, provider: EmbeddingProvider):
        self._provider = provider
        self.provider_id = provider.provider_id
        self._cache: dict[tuple[str, str], EmbeddingVector] = {}
        self._lock = threading.Lock()

    def embed(self, texts: list[str]) -> list[EmbeddingVector]:
        with self._lock:
            missing = [t for t in texts if (self.provider_id, t) not in self._cache]
            # dedupe while preserving order
            missing = list(dict.fromkeys(missing))
        if missing:
            fetched = self._provider.embed(missing)
            with self._lock:
                for text, vector in zip(missing, fetched):
                    self._cache[(self.provider_id, text)] = vector
        with self._lock:
            return [self._cache[(self.provider_id, t)] for t in texts]
