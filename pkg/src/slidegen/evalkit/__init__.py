"""Evaluation kit: text overlap, embedding coverage, text-image relevance, run-level rates and LLM judging."""

from .deck import EmptyRecords, figure_proportion, relevance_score, success_rate, text_image_relevance
from .embeddings import (
    EmbeddingProvider,
    EvalImage,
    ProviderFailure,
    SentenceTransformerProvider,
    StaticProvider,
    ToyHashProvider,
    make_provider,
)
from .judge import RUBRICS, ScoreOutOfRange, UnparseableScore, abbreviate_reference, judge_request, judge_scores, parse_score
from .report import METRICS, MetricReport, MissingArtifacts, aggregate, evaluate_run, latest_pages
from .text import ABBREVIATIONS, EmptyInput, EmptyReference, coverage, lcs_length, rouge_l, split_sentences, tokenize

__all__ = [
    "ABBREVIATIONS", "EmbeddingProvider", "EmptyInput", "EmptyRecords", "EmptyReference", "EvalImage", "METRICS",
    "MetricReport", "MissingArtifacts", "ProviderFailure", "RUBRICS", "ScoreOutOfRange", "SentenceTransformerProvider",
    "StaticProvider", "ToyHashProvider", "UnparseableScore", "abbreviate_reference", "aggregate", "coverage",
    "evaluate_run", "figure_proportion", "judge_request", "judge_scores", "latest_pages", "lcs_length",
    "make_provider", "parse_score", "relevance_score", "rouge_l", "split_sentences", "success_rate",
    "text_image_relevance", "tokenize",
]
