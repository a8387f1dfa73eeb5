"""Per-token tf-idf scores used to bias pseudo-term sampling to rare words."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .corpus import N_RESERVED, ParallelCorpus
from .validation import check_fitted

RESERVED_IDS = frozenset(range(N_RESERVED))


class TfidfScorer(TransformerMixin, BaseEstimator):
    """Scores each token position of a sentence by tf * idf.

    tf is the within-sentence relative count, idf is
    ln((1 + n_docs) / (1 + doc_freq)) + 1.  Tokens listed in `excluded`
    (reserved ids, UNK...) always score 0.  Works on any hashable token
    type, so the same estimator serves id sequences and word sequences.
    """

    def __init__(self, excluded: Iterable = RESERVED_IDS):
        self.excluded = excluded

    def fit(self, X: Sequence, y=None) -> "TfidfScorer":
        """Learn document frequencies from an iterable of token sequences."""
        doc_freq: Counter = Counter()
        n_docs = 0
        for sent in X:
            n_docs += 1
            doc_freq.update(set(sent))
        self.doc_freq_ = dict(doc_freq)
        self.n_docs_ = n_docs
        return self

    def transform(self, X: Sequence) -> list:
        """One score vector (np.float64) per input sentence."""
        check_fitted(self, ["doc_freq_"])
        return [self.score_sentence(sent) for sent in X]

    def score_sentence(self, sentence: Sequence) -> np.ndarray:
        check_fitted(self, ["doc_freq_"])
        excluded = set(self.excluded)
        n = len(sentence)
        scores = np.zeros(n, dtype=np.float64)
        if n == 0:
            return scores
        counts = Counter(sentence)
        for i, tok in enumerate(sentence):
            if tok in excluded:
                continue
            tf = counts[tok] / n
            idf = math.log((1 + self.n_docs_) / (1 + self.doc_freq_.get(tok, 0))) + 1.0
            scores[i] = tf * idf
        return scores


@dataclass(frozen=True)
class ScoreTable:
    """Per-sentence score vectors plus the corpus statistics behind them."""

    scores: tuple
    doc_freq: dict
    n_docs: int

    def __len__(self) -> int:
        return len(self.scores)


def tfidf_scores(corpus: ParallelCorpus) -> ScoreTable:
    """Score every target sentence of a corpus; reserved ids score 0."""
    scorer = TfidfScorer().fit(corpus.targets)
    return ScoreTable(
        tuple(scorer.transform(corpus.targets)),
        scorer.doc_freq_,
        scorer.n_docs_,
    )
