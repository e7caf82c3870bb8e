"""Few-shot demonstration selection over (source, adaptation) pairs.

BM25 ranking follows the Okapi form with an idf floor for very common
terms: tokens are whitespace-split, lowercased and dropped when shorter
than `min_token_len`. Alternatives: embedding-similarity ranking and
seeded random sampling. A length-ratio filter can exclude training
pairs whose adaptation is much shorter/longer than its source.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field

from .errors import (
    EmptyCorpusError,
    EmptySourceError,
    KTooLargeError,
    UnknownDocIdError,
)
from .similarity import CachedEmbeddingProvider, EmbeddingProvider, cosine, embed_text

INDEX_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.5
    b: float = 0.75
    epsilon: float = 0.25
    min_token_len: int = 4

    def __post_init__(self):
        if self.k1 < 0:
            raise ValueError("k1 must be >= 0")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must be in [0, 1]")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.min_token_len < 1:
            raise ValueError("min_token_len must be >= 1")


@dataclass(frozen=True)
class Demonstration:
    source: str
    adaptation: str
    retrieval_score: float
    rank: int


@dataclass(frozen=True)
class Bm25Index:
    doc_ids: tuple
    sources: tuple[str, ...]
    adaptations: tuple[str, ...]
    doc_token_counts: tuple[int, ...]
    avgdl: float
    postings: dict[str, dict[int, int]] = field(repr=False)  # term -> pos -> tf
    idf: dict[str, float] = field(repr=False)
    params: Bm25Params = Bm25Params()

    def __len__(self) -> int:
        return len(self.doc_ids)


def bm25_tokens(text: str, min_token_len: int) -> list[str]:
    """Whitespace tokens, lowercased, shorter ones dropped."""
    return [t for t in text.lower().split() if len(t) >= min_token_len]


def _compute_idf(postings: dict[str, dict[int, int]], n_docs: int, epsilon: float):
    idf: dict[str, float] = {}
    for term, docs in postings.items():
        n_t = len(docs)
        idf[term] = math.log((n_docs - n_t + 0.5) / (n_t + 0.5))
    positive = [v for v in idf.values() if v > 0]
    floor = epsilon * (sum(positive) / len(positive)) if positive else 0.0
    for term, value in idf.items():
        if value < 0:
            idf[term] = floor
    return idf


def build_index(
    pairs: list[tuple[str, str]],
    params: Bm25Params | None = None,
    ids: list | None = None,
) -> Bm25Index:
    """Build an immutable BM25 index over the given training pairs.

    `ids` defaults to positions 0..n-1; they identify documents in
    persisted indexes and break ranking ties.
    """
    if not pairs:
        raise EmptyCorpusError("cannot index an empty corpus")
    if ids is None:
        ids = list(range(len(pairs)))
    elif len(ids) != len(pairs):
        raise ValueError("ids and pairs must have equal length")
    sources = tuple(source for source, _ in pairs)
    adaptations = tuple(adaptation for _, adaptation in pairs)
    params = params or Bm25Params()

    postings: dict[str, dict[int, int]] = {}
    token_counts = []
    for pos, source in enumerate(sources):
        tokens = bm25_tokens(source, params.min_token_len)
        token_counts.append(len(tokens))
        for token in tokens:
            docs = postings.setdefault(token, {})
            docs[pos] = docs.get(pos, 0) + 1
    avgdl = sum(token_counts) / len(token_counts)
    idf = _compute_idf(postings, len(pairs), params.epsilon)
    return Bm25Index(
        doc_ids=tuple(ids),
        sources=sources,
        adaptations=adaptations,
        doc_token_counts=tuple(token_counts),
        avgdl=avgdl,
        postings=postings,
        idf=idf,
        params=params,
    )


def bm25_scores(index: Bm25Index, query: str) -> list[float]:
    """Okapi score of every indexed document against the query."""
    params = index.params
    scores = [0.0] * len(index)
    if index.avgdl == 0.0:
        return scores
    for token in bm25_tokens(query, params.min_token_len):
        token_idf = index.idf.get(token)
        if token_idf is None:
            continue
        for pos, tf in index.postings[token].items():
            dl = index.doc_token_counts[pos]
            norm = params.k1 * (1.0 - params.b + params.b * dl / index.avgdl)
            scores[pos] += token_idf * tf * (params.k1 + 1.0) / (tf + norm)
    return scores


def length_ratio_admissible(source: str, adaptation: str, lo: float, hi: float) -> bool:
    """True iff adaptation/source whitespace-token ratio lies in [lo, hi]."""
    if lo > hi:
        raise ValueError(f"invalid ratio range [{lo}, {hi}]")
    source_len = len(source.split())
    if source_len == 0:
        raise EmptySourceError("source has no tokens; length ratio undefined")
    ratio = len(adaptation.split()) / source_len
    return lo <= ratio <= hi


def _ranked(positions: list[int], scores, index_ids, sources, adaptations, k: int):
    # stable two-pass sort: descending score, ties by ascending doc id
    positions = sorted(positions, key=lambda p: index_ids[p])
    positions.sort(key=lambda p: scores[p], reverse=True)
    return [
        Demonstration(
            source=sources[p],
            adaptation=adaptations[p],
            retrieval_score=scores[p],
            rank=rank,
        )
        for rank, p in enumerate(positions[:k], start=1)
    ]


def bm25_top_k(
    index: Bm25Index,
    query: str,
    k: int = 5,
    ratio_filter: tuple[float, float] | None = None,
) -> list[Demonstration]:
    """Rank the indexed pairs against a query and return the top k.

    With a ratio filter, pairs whose adaptation/source length ratio
    falls outside [lo, hi] are excluded before ranking. May return
    fewer than k demonstrations.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    positions = list(range(len(index)))
    if ratio_filter is not None:
        lo, hi = ratio_filter
        positions = [
            p
            for p in positions
            if length_ratio_admissible(index.sources[p], index.adaptations[p], lo, hi)
        ]
    scores = bm25_scores(index, query)
    return _ranked(
        positions, scores, index.doc_ids, index.sources, index.adaptations, k
    )


def embedding_top_k(
    pairs: list[tuple[str, str]],
    query: str,
    k: int,
    provider: EmbeddingProvider,
) -> list[Demonstration]:
    """Rank pairs by embedding cosine between query and pair source."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not pairs:
        raise EmptyCorpusError("cannot retrieve from an empty corpus")
    cached = (
        provider
        if isinstance(provider, CachedEmbeddingProvider)
        else CachedEmbeddingProvider(provider)
    )
    query_vec = embed_text(query, cached)
    source_vecs = cached.embed([source for source, _ in pairs])
    scores = [cosine(query_vec, vec) for vec in source_vecs]
    sources = [source for source, _ in pairs]
    adaptations = [adaptation for _, adaptation in pairs]
    positions = list(range(len(pairs)))
    return _ranked(positions, scores, positions, sources, adaptations, k)


def derive_doc_seed(seed: int, doc_id) -> int:
    """Stable per-document seed so random sampling is reproducible
    document by document, independent of processing order."""
    digest = hashlib.sha256(f"{seed}:{doc_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def random_k(pairs: list[tuple[str, str]], k: int, seed: int) -> list[Demonstration]:
    """Sample k pairs uniformly without replacement, reproducibly."""
    if k > len(pairs):
        raise KTooLargeError(f"k={k} exceeds corpus size {len(pairs)}")
    rng = random.Random(seed)
    chosen = rng.sample(range(len(pairs)), k)
    return [
        Demonstration(
            source=pairs[p][0],
            adaptation=pairs[p][1],
            retrieval_score=0.0,
            rank=rank,
        )
        for rank, p in enumerate(chosen, start=1)
    ]


def save_index(index: Bm25Index, path) -> None:
    """Persist postings and doc references as versioned JSON.

    Pair texts are not stored; loading joins doc ids back to a corpus.
    """
    payload = {
        "schema_version": INDEX_SCHEMA_VERSION,
        "kind": "bm25-index",
        "params": {
            "k1": index.params.k1,
            "b": index.params.b,
            "epsilon": index.params.epsilon,
            "min_token_len": index.params.min_token_len,
        },
        "doc_ids": list(index.doc_ids),
        "doc_token_counts": list(index.doc_token_counts),
        "avgdl": index.avgdl,
        "postings": {
            term: sorted(docs.items()) for term, docs in index.postings.items()
        },
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, ensure_ascii=False, sort_keys=True)
        handle.write("\n")


def load_index(path, pairs_by_id) -> Bm25Index:
    """Load a persisted index, joining texts from `pairs_by_id`.

    `pairs_by_id` maps doc id -> (source, adaptation) and must cover
    every id stored in the file.
    """
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    if payload.get("schema_version") != INDEX_SCHEMA_VERSION:
        raise ValueError(
            f"unsupported index schema version {payload.get('schema_version')!r}"
        )
    params = Bm25Params(**payload["params"])
    doc_ids = list(payload["doc_ids"])
    missing = [doc_id for doc_id in doc_ids if doc_id not in pairs_by_id]
    if missing:
        raise UnknownDocIdError(f"index references unknown doc ids: {missing[:5]}")
    sources = tuple(pairs_by_id[doc_id][0] for doc_id in doc_ids)
    adaptations = tuple(pairs_by_id[doc_id][1] for doc_id in doc_ids)
    postings = {
        term: {int(pos): int(tf) for pos, tf in docs}
        for term, docs in payload["postings"].items()
    }
    idf = _compute_idf(postings, len(doc_ids), params.epsilon)
    return Bm25Index(
        doc_ids=tuple(doc_ids),
        sources=sources,
        adaptations=adaptations,
        doc_token_counts=tuple(payload["doc_token_counts"]),
        avgdl=float(payload["avgdl"]),
        postings=postings,
        idf=idf,
        params=params,
    )
