"""Tokenization density measurement: tokens per word and bucket shares.

A word is a maximal whitespace-free run with leading/trailing
punctuation/symbol code points stripped; words encode bare (no space
prefix), so the numbers do not depend on surrounding context.  Counting
goes through a word Counter first, which makes every statistic invariant
to corpus order and lets repeated words encode once.
"""

import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Union

from .core import BpeModel, encode_word
from .errors import EmptyCorpusError, TokgraftError


def strip_word(raw: str) -> str:
    """Drop leading/trailing P*/S* code points; may return an empty string."""
    start = 0
    end = len(raw)
    while start < end and unicodedata.category(raw[start])[0] in "PS":
        start += 1
    while end > start and unicodedata.category(raw[end - 1])[0] in "PS":
        end -= 1
    return raw[start:end]


def iter_words(text: str) -> Iterable[str]:
    """Words of a text block, in document order."""
    for raw in text.split():
        word = strip_word(raw)
        if word:
            yield word


@dataclass
class FreqTable:
    """Token occurrence counts over a corpus, input to removal scoring."""
    counts: dict[int, int]
    total_tokens: int
    corpus_label: str = "corpus"


@dataclass
class DensityReport:
    """Per-(model, corpus) density statistics.

    pct_1/pct_le2/pct_gt2 are percentages of words encoded into exactly
    one, at most two, and more than two tokens; pct_le2 + pct_gt2 == 100.
    """
    model: str
    corpus: str
    words: int
    tokens: int
    tok_per_word: float
    pct_1: float
    pct_le2: float
    pct_gt2: float

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "corpus": self.corpus,
            "words": self.words,
            "tokens": self.tokens,
            "tok_per_word": self.tok_per_word,
            "pct_1": self.pct_1,
            "pct_le2": self.pct_le2,
            "pct_gt2": self.pct_gt2,
        }


def token_frequency(model: BpeModel, corpus: Iterable[str],
                    corpus_label: str = "corpus") -> FreqTable:
    """Token occurrence counts across encode_word of every corpus word."""
    word_counts = Counter(corpus)
    counts: dict[int, int] = {}
    total = 0
    for word, n in word_counts.items():
        ids = encode_word(model, word.encode("utf-8"))
        for tid in ids:
            counts[tid] = counts.get(tid, 0) + n
        total += n * len(ids)
    return FreqTable(counts, total, corpus_label)


def _report_from_counts(model: BpeModel, word_counts: Counter,
                        model_label: str, corpus_label: str) -> DensityReport:
    words = sum(word_counts.values())
    if words == 0:
        raise EmptyCorpusError(f"corpus {corpus_label!r} yielded no words")
    tokens = 0
    one = 0
    le2 = 0
    for word, n in word_counts.items():
        pieces = len(encode_word(model, word.encode("utf-8")))
        tokens += pieces * n
        if pieces == 1:
            one += n
        if pieces <= 2:
            le2 += n
    return DensityReport(
        model=model_label,
        corpus=corpus_label,
        words=words,
        tokens=tokens,
        tok_per_word=tokens / words,
        pct_1=100.0 * one / words,
        pct_le2=100.0 * le2 / words,
        pct_gt2=100.0 * (words - le2) / words,
    )


def density_report(model: BpeModel, corpus: Iterable[str],
                   model_label: str = "model",
                   corpus_label: str = "corpus") -> DensityReport:
    """Density statistics of one model over one word stream."""
    return _report_from_counts(model, Counter(corpus), model_label, corpus_label)


Cell = Union[DensityReport, TokgraftError]


def compare_density(models: list[tuple[str, BpeModel]],
                    corpora: list[tuple[str, Iterable[str]]],
                    ) -> tuple[dict[tuple[str, str], Cell], dict[str, float | None]]:
    """One report per (model, corpus) pair plus per-model mean tokens/word.

    Each corpus stream is consumed once into a word Counter and reused for
    every model.  A failing cell holds its error instead of aborting the
    rest; the per-model average is the unweighted mean over its successful
    cells (None if every cell failed).
    """
    if not models:
        raise ValueError("compare_density needs at least one model")
    if not corpora:
        raise ValueError("compare_density needs at least one corpus")
    corpus_counts = [(label, Counter(stream)) for label, stream in corpora]
    cells: dict[tuple[str, str], Cell] = {}
    averages: dict[str, float | None] = {}
    for model_label, model in models:
        per_corpus: list[float] = []
        for corpus_label, word_counts in corpus_counts:
            try:
                report = _report_from_counts(model, word_counts, model_label, corpus_label)
                cells[(model_label, corpus_label)] = report
                per_corpus.append(report.tok_per_word)
            except TokgraftError as exc:
                cells[(model_label, corpus_label)] = exc
        averages[model_label] = (
            sum(per_corpus) / len(per_corpus) if per_corpus else None)
    return cells, averages
