"""Corpus ingestion, budget filtering, splitting, stats, evaluation.

Documents carry an id, a source text, an optional reference adaptation
and a task tag (PL or ER). Corpora load from JSONL or CSV. Statistics
report both aggregation conventions for the readability index: micro
(over pooled corpus counts) and macro (mean of per-document values),
because the two differ and published tables mix them.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from statistics import fmean
from typing import Callable, Mapping, Optional

from .errors import (
    CorpusParseError,
    DuplicateIdError,
    EmptyCorpusError,
    MissingReferencesError,
    SplitSpecError,
    UnknownDocIdError,
)
from .prompts import TASKS, initial_system_prompt
from .similarity import EmbeddingProvider, bow_vector, cosine, table_average
from .textstats import fh_from_counts, fh_index, text_stats

import random

DEFAULT_TOKEN_BUDGET = 3000
DEFAULT_DEV_SIZE = 240


@dataclass(frozen=True)
class Document:
    id: str
    source: str
    reference: Optional[str] = None
    task: str = "PL"

    def __post_init__(self):
        if not str(self.id):
            raise ValueError("document id must be non-empty")
        if not self.source or not self.source.strip():
            raise ValueError("document source must be non-empty")
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}; expected one of {TASKS}")


def _document_from_fields(fields: Mapping, line: int) -> Document:
    for key in ("id", "source", "task"):
        if fields.get(key) in (None, ""):
            raise CorpusParseError(f"line {line}: missing field {key!r}", line=line)
    reference = fields.get("reference")
    if reference == "":
        reference = None
    try:
        return Document(
            id=str(fields["id"]),
            source=fields["source"],
            reference=reference,
            task=fields["task"],
        )
    except ValueError as exc:
        raise CorpusParseError(f"line {line}: {exc}", line=line) from exc


def load_corpus(path, fmt: str | None = None) -> list[Document]:
    """Load documents from a JSONL or CSV file.

    `fmt` defaults to the file suffix. Duplicate ids and malformed
    lines raise with the offending line number.
    """
    if fmt is None:
        name = str(path).lower()
        fmt = "csv" if name.endswith(".csv") else "jsonl"
    if fmt not in ("jsonl", "csv"):
        raise ValueError(f"unknown corpus format {fmt!r}")
    docs = _load_jsonl(path) if fmt == "jsonl" else _load_csv(path)
    if not docs:
        raise EmptyCorpusError(f"no documents in {path}")
    return docs


def _load_jsonl(path) -> list[Document]:
    docs: list[Document] = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                fields = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusParseError(
                    f"line {line_no}: invalid JSON: {exc}", line=line_no
                ) from exc
            if not isinstance(fields, dict):
                raise CorpusParseError(
                    f"line {line_no}: expected a JSON object", line=line_no
                )
            doc = _document_from_fields(fields, line_no)
            _check_duplicate(seen, doc.id, line_no)
            docs.append(doc)
    return docs


def _load_csv(path) -> list[Document]:
    docs: list[Document] = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        for row in reader:
            line_no = reader.line_num
            row.pop(None, None)
            doc = _document_from_fields(row, line_no)
            _check_duplicate(seen, doc.id, line_no)
            docs.append(doc)
    return docs


def _check_duplicate(seen: dict[str, int], doc_id: str, line_no: int) -> None:
    if doc_id in seen:
        raise DuplicateIdError(
            f"line {line_no}: duplicate id {doc_id!r} (first seen on line {seen[doc_id]})",
            line=line_no,
        )
    seen[doc_id] = line_no


def save_corpus(docs: list[Document], path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for doc in docs:
            handle.write(
                json.dumps(
                    {
                        "id": doc.id,
                        "source": doc.source,
                        "reference": doc.reference,
                        "task": doc.task,
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
                + "\n"
            )


def whitespace_token_count(text: str) -> int:
    return len(text.split())


def filter_by_token_budget(
    docs: list[Document],
    budget: int = DEFAULT_TOKEN_BUDGET,
    counter: Callable[[str], int] = whitespace_token_count,
) -> tuple[list[Document], list[Document]]:
    """Partition docs into (kept, dropped) by prompt-size budget.

    The counted text is the initial instruction prompt for the doc's
    task plus source plus reference; a doc exactly at the budget is
    kept. The counter is pluggable because the reference setup counted
    with a model-specific tokenizer; the default is whitespace tokens.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    kept: list[Document] = []
    dropped: list[Document] = []
    for doc in docs:
        text = initial_system_prompt(doc.task) + "\n" + doc.source
        if doc.reference:
            text += "\n" + doc.reference
        (kept if counter(text) <= budget else dropped).append(doc)
    return kept, dropped


@dataclass(frozen=True)
class SplitSpec:
    dev_size: int = DEFAULT_DEV_SIZE
    seed: int = 0

    def __post_init__(self):
        if self.dev_size < 1:
            raise SplitSpecError("dev_size must be >= 1")


def split_corpus(
    docs: list[Document], spec: SplitSpec
) -> tuple[list[Document], list[Document]]:
    """Deterministic seeded (train, dev) partition, corpus order kept."""
    if spec.dev_size >= len(docs):
        raise SplitSpecError(
            f"dev_size {spec.dev_size} must be smaller than corpus size {len(docs)}"
        )
    rng = random.Random(spec.seed)
    dev_positions = set(rng.sample(range(len(docs)), spec.dev_size))
    dev = [doc for pos, doc in enumerate(docs) if pos in dev_positions]
    train = [doc for pos, doc in enumerate(docs) if pos not in dev_positions]
    return train, dev


@dataclass(frozen=True)
class CorpusStatsReport:
    doc_count: int
    sentence_count: int
    word_count: int
    sentences_per_doc: float
    words_per_sentence: float
    syllables_per_word: float
    fh_micro: float
    fh_macro: float
    bow_sim: Optional[float] = None
    emb_sim: Optional[float] = None
    avg_sim: Optional[float] = None


def corpus_stats(
    docs: list[Document],
    side: str = "source",
    embed_provider: EmbeddingProvider | None = None,
) -> CorpusStatsReport:
    """Counts and readability over one side of the corpus.

    Micro readability pools sentence/word/syllable counts across the
    corpus; macro averages per-document index values. Similarity rows
    (source vs reference, mean per doc) are filled in only when an
    embedding provider is given; they require every reference.
    """
    if not docs:
        raise EmptyCorpusError("cannot compute stats of an empty corpus")
    if side not in ("source", "reference"):
        raise ValueError(f"side must be source or reference, got {side!r}")
    if side == "reference" and any(doc.reference is None for doc in docs):
        raise MissingReferencesError("side=reference requires every reference")

    texts = [doc.source if side == "source" else doc.reference for doc in docs]
    total_sentences = total_words = total_syllables = 0
    per_doc_fh: list[float] = []
    for text in texts:
        stats = text_stats(text)
        total_sentences += stats.sentence_count
        total_words += stats.word_count
        total_syllables += stats.syllable_count
        per_doc_fh.append(
            fh_from_counts(
                stats.sentence_count, stats.word_count, stats.syllable_count
            ).fh
        )

    bow_sim = emb_sim = avg_sim = None
    if embed_provider is not None:
        if any(doc.reference is None for doc in docs):
            raise MissingReferencesError("similarity rows require every reference")
        bow_sims = [
            cosine(bow_vector(doc.source), bow_vector(doc.reference)) for doc in docs
        ]
        vectors = embed_provider.embed(
            [doc.source for doc in docs] + [doc.reference for doc in docs]
        )
        emb_sims = [
            cosine(vectors[pos], vectors[pos + len(docs)])
            for pos in range(len(docs))
        ]
        bow_sim = fmean(bow_sims)
        emb_sim = fmean(emb_sims)
        avg_sim = (bow_sim + emb_sim) / 2.0

    return CorpusStatsReport(
        doc_count=len(docs),
        sentence_count=total_sentences,
        word_count=total_words,
        sentences_per_doc=total_sentences / len(docs),
        words_per_sentence=total_words / total_sentences,
        syllables_per_word=total_syllables / total_words,
        fh_micro=fh_from_counts(total_sentences, total_words, total_syllables).fh,
        fh_macro=fmean(per_doc_fh),
        bow_sim=bow_sim,
        emb_sim=emb_sim,
        avg_sim=avg_sim,
    )


def render_stats_table(report: CorpusStatsReport, title: str = "corpus") -> str:
    rows = [
        ("Documents", f"{report.doc_count}"),
        ("Sentences per doc", f"{report.sentences_per_doc:.2f}"),
        ("Words per sentence", f"{report.words_per_sentence:.2f}"),
        ("Syllables per word", f"{report.syllables_per_word:.2f}"),
        ("FH readability (micro)", f"{report.fh_micro:.2f}"),
        ("FH readability (macro)", f"{report.fh_macro:.2f}"),
    ]
    if report.bow_sim is not None:
        rows.append(("BoW similarity", f"{report.bow_sim:.4f}"))
        rows.append(("Embedding similarity", f"{report.emb_sim:.4f}"))
        rows.append(("Average similarity", f"{report.avg_sim:.4f}"))
    width = max(len(name) for name, _ in rows)
    lines = [title] + [f"{name.ljust(width)}  {value}" for name, value in rows]
    return "\n".join(lines)


@dataclass(frozen=True)
class DocEvaluation:
    doc_id: str
    fh: float
    fh_gain: float
    bow_sim: float
    emb_sim: float


@dataclass(frozen=True)
class EvaluationReport:
    doc_count: int
    fh: float
    fh_gain: float
    bow_sim: float
    emb_sim: float
    table_avg: float
    rows: tuple[DocEvaluation, ...]


def evaluate_run(
    outputs: Mapping[str, str],
    docs: list[Document],
    embed_provider: EmbeddingProvider,
) -> EvaluationReport:
    """Score run outputs against references, plus the aggregate row.

    Per document: readability of the adaptation, its gain over the
    source, and BoW/embedding cosine against the reference. The
    aggregate averages each column over documents; the three-way table
    average is computed from those means.
    """
    if not outputs:
        raise EmptyCorpusError("no outputs to evaluate")
    docs_by_id = {doc.id: doc for doc in docs}
    unknown = [doc_id for doc_id in outputs if doc_id not in docs_by_id]
    if unknown:
        raise UnknownDocIdError(f"outputs reference unknown doc ids: {unknown[:5]}")
    ordered_ids = [doc.id for doc in docs if doc.id in outputs]
    missing_refs = [
        doc_id for doc_id in ordered_ids if docs_by_id[doc_id].reference is None
    ]
    if missing_refs:
        raise MissingReferencesError(
            f"docs without references cannot be evaluated: {missing_refs[:5]}"
        )

    adaptations = [outputs[doc_id] for doc_id in ordered_ids]
    references = [docs_by_id[doc_id].reference for doc_id in ordered_ids]
    vectors = embed_provider.embed(adaptations + references)

    rows = []
    for pos, doc_id in enumerate(ordered_ids):
        doc = docs_by_id[doc_id]
        adaptation = adaptations[pos]
        fh_val = fh_index(adaptation).fh
        rows.append(
            DocEvaluation(
                doc_id=doc_id,
                fh=fh_val,
                fh_gain=fh_val - fh_index(doc.source).fh,
                bow_sim=cosine(bow_vector(adaptation), bow_vector(doc.reference)),
                emb_sim=cosine(vectors[pos], vectors[pos + len(ordered_ids)]),
            )
        )

    mean_fh = fmean(row.fh for row in rows)
    mean_gain = fmean(row.fh_gain for row in rows)
    mean_bow = fmean(row.bow_sim for row in rows)
    mean_emb = fmean(row.emb_sim for row in rows)
    return EvaluationReport(
        doc_count=len(rows),
        fh=mean_fh,
        fh_gain=mean_gain,
        bow_sim=mean_bow,
        emb_sim=mean_emb,
        table_avg=table_average(mean_fh, mean_bow, mean_emb),
        rows=tuple(rows),
    )


def render_evaluation_table(report: EvaluationReport) -> str:
    header = f"{'doc':<16}{'FH gain':>10}{'FH':>10}{'BoW':>9}{'Emb':>9}"
    lines = [header]
    for row in report.rows:
        lines.append(
            f"{row.doc_id:<16}{row.fh_gain:>10.2f}{row.fh:>10.2f}"
            f"{row.bow_sim:>9.4f}{row.emb_sim:>9.4f}"
        )
    lines.append(
        f"{'MEAN':<16}{report.fh_gain:>10.2f}{report.fh:>10.2f}"
        f"{report.bow_sim:>9.4f}{report.emb_sim:>9.4f}"
        f"   avg {report.table_avg:.2f}"
    )
    return "\n".join(lines)
