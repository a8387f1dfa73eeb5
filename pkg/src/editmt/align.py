"""Word alignment between source sentences and target-side constraints.

The built-in aligner is IBM Model 1 trained by EM.  Precomputed alignments
in srcIndex-tgtIndex text format plug in behind the same interface, so an
external alignment tool can replace the EM model without touching callers.
Constraint alignments feed the per-source-token labels that the encoder
consumes as an extra embedding.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from sklearn.base import BaseEstimator

from .corpus import ParallelCorpus, Vocabulary
from .validation import DataError, check_fitted, check_same_length

DEFAULT_THRESHOLD = 0.1


@dataclass(frozen=True)
class AlignedConstraint:
    """A target-side constraint span and the source positions aligned to it."""

    target_span: tuple  # (start, end), end exclusive
    source_span: tuple  # sorted source indices, possibly empty


class IbmModel1Aligner(BaseEstimator):
    """IBM Model 1 translation table fitted by expectation maximisation.

    The table is t(target_word | source_word), initialised uniformly over
    the target words co-occurring with each source word, so each source
    row is a probability distribution from the start.
    """

    def __init__(self, em_iterations: int = 5, threshold: float = DEFAULT_THRESHOLD):
        self.em_iterations = em_iterations
        self.threshold = threshold

    def fit(self, X: Sequence, y: Sequence | None = None) -> "IbmModel1Aligner":
        """Fit on source sentences X and target sentences y."""
        if y is None:
            raise ValueError("IbmModel1Aligner.fit needs both corpus sides")
        check_same_length(X, y, "source corpus", "target corpus")
        pairs = [(tuple(s), tuple(t)) for s, t in zip(X, y) if s and t]
        if not pairs:
            raise DataError("cannot fit an aligner on an empty corpus")

        cooc: dict = defaultdict(set)
        for src, tgt in pairs:
            for e in src:
                cooc[e].update(tgt)
        table: dict = {
            e: {f: 1.0 / len(fs) for f in fs} for e, fs in cooc.items()
        }

        self.log_likelihood_: list = []
        for _ in range(self.em_iterations):
            counts: dict = defaultdict(float)
            totals: dict = defaultdict(float)
            for src, tgt in pairs:
                for f in tgt:
                    z = sum(table[e][f] for e in src)
                    for e in src:
                        c = table[e][f] / z
                        counts[(e, f)] += c
                        totals[e] += c
            table = {
                e: {
                    f: counts[(e, f)] / totals[e]
                    for f in fs
                }
                for e, fs in cooc.items()
            }
            self.log_likelihood_.append(self._log_likelihood(table, pairs))
        self.table_ = table
        return self

    @staticmethod
    def _log_likelihood(table: dict, pairs: list) -> float:
        total = 0.0
        for src, tgt in pairs:
            for f in tgt:
                total += math.log(
                    sum(table[e].get(f, 0.0) for e in src) / len(src)
                )
        return total

    def translation_prob(self, target_word, source_word) -> float:
        check_fitted(self, ["table_"])
        return self.table_.get(source_word, {}).get(target_word, 0.0)

    def align_spans(
        self, source: Sequence, target: Sequence, spans: Sequence, index: int | None = None
    ) -> list:
        """AlignedConstraint per target span via argmax over source positions.

        Each constraint token votes for its best source position; positions
        scoring below the threshold are dropped.  `index` is unused here and
        exists for interface parity with precomputed alignments.
        """
        check_fitted(self, ["table_"])
        out = []
        for start, end in spans:
            positions = set()
            for t in range(start, end):
                best_j, best_p = None, 0.0
                for j, e in enumerate(source):
                    p = self.table_.get(e, {}).get(target[t], 0.0)
                    if p > best_p:
                        best_j, best_p = j, p
                if best_j is not None and best_p >= self.threshold:
                    positions.add(best_j)
            out.append(AlignedConstraint((start, end), tuple(sorted(positions))))
        return out

    def align_terms(self, source: Sequence, constraints: Sequence) -> list:
        """Inference-time variant: align constraint tokens with no target text."""
        check_fitted(self, ["table_"])
        out = []
        for term in constraints:
            positions = set()
            for tok in term:
                best_j, best_p = None, 0.0
                for j, e in enumerate(source):
                    p = self.table_.get(e, {}).get(tok, 0.0)
                    if p > best_p:
                        best_j, best_p = j, p
                if best_j is not None and best_p >= self.threshold:
                    positions.add(best_j)
            out.append(AlignedConstraint((-1, -1), tuple(sorted(positions))))
        return out

    def save_table(self, path, vocab: Vocabulary) -> None:
        """TSV dump (source_symbol, target_symbol, probability), sorted."""
        check_fitted(self, ["table_"])
        rows = []
        for e in sorted(self.table_):
            for f in sorted(self.table_[e]):
                rows.append(f"{vocab.symbol(e)}\t{vocab.symbol(f)}\t{self.table_[e][f]!r}")
        Path(path).write_text("".join(r + "\n" for r in rows), encoding="utf-8")

    @classmethod
    def load_table(cls, path, vocab: Vocabulary, threshold: float = DEFAULT_THRESHOLD):
        aligner = cls(threshold=threshold)
        table: dict = defaultdict(dict)
        for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            cols = raw.split("\t")
            if len(cols) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 TSV columns")
            table[vocab.id(cols[0])][vocab.id(cols[1])] = float(cols[2])
        aligner.table_ = dict(table)
        aligner.log_likelihood_ = []
        return aligner


class PharaohAlignments:
    """Precomputed per-pair alignment links behind the aligner interface."""

    def __init__(self, links: Sequence):
        self.links = list(links)

    def align_spans(
        self, source: Sequence, target: Sequence, spans: Sequence, index: int | None = None
    ) -> list:
        if index is None:
            raise ValueError("precomputed alignments need the sentence pair index")
        pair_links = self.links[index]
        out = []
        for start, end in spans:
            positions = sorted(
                {s for s, t in pair_links if start <= t < end and s < len(source)}
            )
            out.append(AlignedConstraint((start, end), tuple(positions)))
        return out


def train_aligner(corpus: ParallelCorpus, em_iterations: int = 5) -> IbmModel1Aligner:
    return IbmModel1Aligner(em_iterations=em_iterations).fit(corpus.sources, corpus.targets)


def locate_spans(target: Sequence, constraints: Sequence) -> list:
    """Left-to-right occurrence spans of each constraint in the target.

    Constraints are searched in order, each starting after the previous
    span begins, matching how constraint lists are stored (target order).
    """
    spans = []
    search_from = 0
    for term in constraints:
        term = tuple(term)
        if not term:
            raise ValueError("empty constraint")
        found = None
        for start in range(search_from, len(target) - len(term) + 1):
            if tuple(target[start : start + len(term)]) == term:
                found = (start, start + len(term))
                break
        if found is None:
            raise DataError(f"constraint {term!r} does not occur in the target")
        spans.append(found)
        search_from = found[0] + 1
    return spans


def align_constraints(
    source: Sequence,
    target: Sequence,
    constraints: Sequence,
    model,
    index: int | None = None,
) -> list:
    """Locate each constraint in the target and align it to source positions."""
    return model.align_spans(source, target, locate_spans(target, constraints), index)


def alignment_labels(source_len: int, aligned: Sequence) -> tuple:
    """Per-source-token label vector: position p gets i if p belongs to the
    i-th constraint's aligned source positions (1-based, first wins), else 0."""
    labels = [0] * source_len
    for i, item in enumerate(aligned, start=1):
        span = getattr(item, "source_span", item)
        for p in span:
            if not 0 <= p < source_len:
                raise ValueError(f"aligned source position {p} out of range")
            if labels[p] == 0:
                labels[p] = i
    return tuple(labels)
