"""Aligner tests: EM behaviour, constraint alignment, label construction."""

from __future__ import annotations

import numpy as np
import pytest

from editmt.align import (
    AlignedConstraint,
    IbmModel1Aligner,
    PharaohAlignments,
    align_constraints,
    alignment_labels,
    locate_spans,
    train_aligner,
)
from editmt.corpus import ParallelCorpus, Vocabulary, build_vocabulary
from editmt.validation import DataError, NotFittedError


def lexicon_corpus(n_words: int = 6, n_pairs: int = 120, seed: int = 0) -> ParallelCorpus:
    """Pairs built from a bijective lexicon src word w -> tgt word w + 100."""
    rng = np.random.default_rng(seed)
    sources, targets = [], []
    for _ in range(n_pairs):
        length = int(rng.integers(2, 5))
        words = rng.choice(n_words, size=length, replace=False)
        sources.append(tuple(int(w) for w in words))
        targets.append(tuple(int(w) + 100 for w in words))
    return ParallelCorpus(tuple(sources), tuple(targets))


class TestIbmModel1:
    def test_em_recovers_bijective_lexicon(self):
        corpus = lexicon_corpus()
        aligner = train_aligner(corpus, em_iterations=8)
        for w in range(6):
            row = aligner.table_[w]
            assert max(row, key=row.get) == w + 100
            assert row[w + 100] > 0.9

    def test_rows_are_distributions(self):
        aligner = train_aligner(lexicon_corpus(), em_iterations=3)
        for row in aligner.table_.values():
            assert sum(row.values()) == pytest.approx(1.0, abs=1e-9)

    def test_log_likelihood_nondecreasing(self):
        aligner = train_aligner(lexicon_corpus(n_pairs=40), em_iterations=6)
        ll = aligner.log_likelihood_
        assert len(ll) == 6
        for a, b in zip(ll, ll[1:]):
            assert b >= a - 1e-9

    def test_empty_corpus_rejected(self):
        with pytest.raises(DataError):
            train_aligner(ParallelCorpus((), ()))

    def test_unfitted_rejected(self):
        with pytest.raises(NotFittedError):
            IbmModel1Aligner().align_spans((1,), (2,), [(0, 1)])

    def test_table_roundtrip(self, tmp_path):
        vocab = build_vocabulary(["a b c", "x y z"])
        enc = vocab.encode
        corpus = ParallelCorpus(
            (enc("a b"), enc("b c"), enc("a c")),
            (enc("x y"), enc("y z"), enc("x z")),
        )
        aligner = train_aligner(corpus, em_iterations=4)
        path = tmp_path / "ttable.tsv"
        aligner.save_table(path, vocab)
        loaded = IbmModel1Aligner.load_table(path, vocab)
        assert loaded.table_ == aligner.table_


class TestConstraintAlignment:
    @pytest.fixture()
    def aligner(self):
        return train_aligner(lexicon_corpus(), em_iterations=8)

    def test_single_word_constraint(self, aligner):
        source, target = (3, 1, 4), (103, 101, 104)
        aligned = align_constraints(source, target, ((101,),), aligner)
        assert aligned == [AlignedConstraint((1, 2), (1,))]

    def test_multi_word_constraint_unions_positions(self, aligner):
        source, target = (2, 5, 0), (102, 105, 100)
        aligned = align_constraints(source, target, ((102, 105),), aligner)
        assert aligned[0].target_span == (0, 2)
        assert aligned[0].source_span == (0, 1)

    def test_threshold_drops_weak_links(self, aligner):
        aligner.threshold = 1.01  # nothing can reach this
        aligned = align_constraints((3,), (103,), ((103,),), aligner)
        assert aligned[0].source_span == ()

    def test_align_terms_without_target(self, aligner):
        aligned = aligner.align_terms((0, 3), ((103,), (100,)))
        assert aligned[0].source_span == (1,)
        assert aligned[1].source_span == (0,)


class TestPharaoh:
    def test_links_filtered_by_span(self):
        model = PharaohAlignments([frozenset({(0, 0), (2, 1), (1, 2)})])
        aligned = model.align_spans((9, 8, 7), (5, 6, 4), [(1, 3)], index=0)
        assert aligned[0].source_span == (1, 2)

    def test_index_required(self):
        model = PharaohAlignments([frozenset()])
        with pytest.raises(ValueError):
            model.align_spans((1,), (2,), [(0, 1)])


class TestSpansAndLabels:
    def test_locate_spans_in_order(self):
        target = ("x", "a", "b", "a", "y")
        assert locate_spans(target, (("a", "b"), ("a",))) == [(1, 3), (3, 4)]

    def test_locate_missing_constraint(self):
        with pytest.raises(DataError):
            locate_spans(("a",), (("b",),))

    def test_frozen_label_example(self):
        aligned = [
            AlignedConstraint((0, 1), (1,)),
            AlignedConstraint((2, 3), (3,)),
        ]
        assert alignment_labels(5, aligned) == (0, 1, 0, 2, 0)

    def test_first_constraint_wins_overlaps(self):
        aligned = [AlignedConstraint((0, 1), (2,)), AlignedConstraint((1, 2), (2,))]
        assert alignment_labels(4, aligned) == (0, 0, 1, 0)

    def test_no_constraints_gives_zeros(self):
        assert alignment_labels(3, []) == (0, 0, 0)

    def test_out_of_range_position_rejected(self):
        with pytest.raises(ValueError):
            alignment_labels(2, [AlignedConstraint((0, 1), (5,))])
