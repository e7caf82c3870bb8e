"""Spanish text adaptation pipeline with metric-gated revision cycles.

Pipeline stages: corpus ingestion and statistics, few-shot
demonstration retrieval, prompt rendering against LLM providers,
readability/similarity scoring, iterative refinement with a strict
improvement gate, and cross-stream ensembling.
"""

from .corpus import (
    CorpusStatsReport,
    Document,
    EvaluationReport,
    SplitSpec,
    corpus_stats,
    evaluate_run,
    filter_by_token_budget,
    load_corpus,
    split_corpus,
)
from .errors import ApecError
from .generation import (
    GREEDY,
    INITIAL_SAMPLED,
    REFINE,
    ChatProvider,
    DecodingParams,
    EchoChatProvider,
    GenerationRequest,
    HttpChatProvider,
    ParsedApecResponse,
    ScriptedChatProvider,
    generate_text,
    parse_apec_response,
    render_apec_prompt,
    render_initial_prompt,
)
from .refine import (
    ApecConfig,
    ApecTrace,
    CycleRecord,
    EnsembleChoice,
    ensemble_select,
    run_apec,
    score_candidate,
)
from .retrieval import (
    Bm25Index,
    Bm25Params,
    Demonstration,
    bm25_top_k,
    build_index,
    embedding_top_k,
    length_ratio_admissible,
    load_index,
    random_k,
    save_index,
)
from .similarity import (
    CachedEmbeddingProvider,
    EmbeddingProvider,
    HashEmbeddingProvider,
    HttpEmbeddingProvider,
    MetricReport,
    bow_vector,
    combined_score,
    cosine,
    table_average,
)
from .textstats import (
    FhBreakdown,
    TextStats,
    count_syllables,
    fh_from_counts,
    fh_index,
    segment_sentences,
    text_stats,
    tokenize_words,
)

__version__ = "0.1.0"

__all__ = [
    "ApecConfig",
    "ApecError",
    "ApecTrace",
    "Bm25Index",
    "Bm25Params",
    "CachedEmbeddingProvider",
    "ChatProvider",
    "CorpusStatsReport",
    "CycleRecord",
    "DecodingParams",
    "Demonstration",
    "Document",
    "EchoChatProvider",
    "EmbeddingProvider",
    "EnsembleChoice",
    "EvaluationReport",
    "FhBreakdown",
    "GREEDY",
    "GenerationRequest",
    "HashEmbeddingProvider",
    "HttpChatProvider",
    "HttpEmbeddingProvider",
    "INITIAL_SAMPLED",
    "MetricReport",
    "ParsedApecResponse",
    "REFINE",
    "ScriptedChatProvider",
    "SplitSpec",
    "TextStats",
    "bm25_top_k",
    "bow_vector",
    "build_index",
    "combined_score",
    "corpus_stats",
    "cosine",
    "count_syllables",
    "embedding_top_k",
    "ensemble_select",
    "evaluate_run",
    "fh_from_counts",
    "fh_index",
    "filter_by_token_budget",
    "generate_text",
    "length_ratio_admissible",
    "load_corpus",
    "load_index",
    "parse_apec_response",
    "random_k",
    "render_apec_prompt",
    "render_initial_prompt",
    "run_apec",
    "save_index",
    "score_candidate",
    "segment_sentences",
    "split_corpus",
    "table_average",
    "text_stats",
    "tokenize_words",
]
