"""Tests for the edit-script expert policy.

Expected values are produced by independent oracles implemented here:
a top-down memoised edit distance, and brute-force enumeration over all
keep/delete masks for label optimality.
"""

from __future__ import annotations

import functools
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from editmt.oracle import (
    DELETE,
    KEEP,
    EditScript,
    FragmentRecord,
    PlaceholderOverflowError,
    apply_edit_script,
    corrupt_for_insertion,
    deletion_labels,
    insertion_labels,
    levenshtein_distance,
    optimal_edit_script,
)


def oracle_edit_distance(a: tuple, b: tuple) -> int:
    """Independent top-down edit distance used to check the implementation."""

    @functools.lru_cache(maxsize=None)
    def go(i: int, j: int) -> int:
        if i == len(a):
            return len(b) - j
        if j == len(b):
            return len(a) - i
        sub = go(i + 1, j + 1) + (0 if a[i] == b[j] else 1)
        return min(sub, go(i + 1, j) + 1, go(i, j + 1) + 1)

    return go(0, 0)


def is_subsequence(sub: tuple, seq: tuple) -> bool:
    it = iter(seq)
    return all(tok in it for tok in sub)


def oracle_min_indel(candidate: tuple, reference: tuple, protect: tuple) -> int:
    """Brute-force minimal deletions+insertions over all keep masks.

    Only masks whose survivors form a subsequence of the reference (the
    reconstructible ones) are considered.
    """
    best = None
    n = len(candidate)
    for mask in itertools.product((True, False), repeat=n):
        if any(p and not k for p, k in zip(protect, mask)):
            continue
        survivors = tuple(t for t, k in zip(candidate, mask) if k)
        if not is_subsequence(survivors, reference):
            continue
        cost = (n - len(survivors)) + (len(reference) - len(survivors))
        if best is None or cost < best:
            best = cost
    return best


def script_cost(script: EditScript) -> int:
    return script.del_labels.count(DELETE) + sum(script.placeholder_counts)


class TestLevenshteinDistance:
    def test_frozen_example(self):
        # independent oracle over the 3x3 table gives 2 (substitute q, substitute... )
        a, b = ("p", "q", "r"), ("p", "r", "s")
        assert oracle_edit_distance(a, b) == 2
        assert levenshtein_distance(a, b) == 2

    def test_empty_sides(self):
        assert levenshtein_distance((), ()) == 0
        assert levenshtein_distance((), ("a", "b")) == 2
        assert levenshtein_distance(("a", "b", "c"), ()) == 3

    def test_identity(self):
        assert levenshtein_distance(("x", "y"), ("x", "y")) == 0

    @given(
        st.lists(st.integers(0, 2), max_size=7),
        st.lists(st.integers(0, 2), max_size=7),
    )
    @settings(max_examples=200, deadline=None)
    def test_matches_oracle_and_symmetry(self, a, b):
        a, b = tuple(a), tuple(b)
        d = levenshtein_distance(a, b)
        assert d == oracle_edit_distance(a, b)
        assert d == levenshtein_distance(b, a)
        assert (d == 0) == (a == b)


class TestDeletionLabels:
    def test_identity_keeps_everything(self):
        cand = ("a", "b", "c")
        assert deletion_labels(cand, cand, (False,) * 3) == (KEEP,) * 3

    def test_frozen_example_noise_token(self):
        # brute force confirms cost 1 is optimal and unique to this labelling
        cand, ref = ("a", "x", "b"), ("a", "b")
        assert oracle_min_indel(cand, ref, (False,) * 3) == 1
        assert deletion_labels(cand, ref, (False,) * 3) == (KEEP, DELETE, KEEP)

    def test_protected_token_always_kept(self):
        cand, ref = ("a", "x", "b"), ("a", "b")
        labels = deletion_labels(cand, ref, (False, True, False))
        assert labels == (KEEP, KEEP, KEEP)

    def test_leftmost_match_preferred(self):
        # both copies of "a" could survive; the earlier one is chosen
        assert deletion_labels(("a", "a"), ("a",), (False, False)) == (KEEP, DELETE)

    def test_mask_length_checked(self):
        with pytest.raises(ValueError):
            deletion_labels(("a",), ("a",), (False, False))

    @given(
        st.lists(st.integers(0, 3), max_size=6),
        st.lists(st.integers(0, 3), max_size=6),
    )
    @settings(max_examples=200, deadline=None)
    def test_unprotected_labels_are_optimal(self, cand, ref):
        cand, ref = tuple(cand), tuple(ref)
        protect = (False,) * len(cand)
        script = optimal_edit_script(cand, ref, protect)
        assert script.del_labels == deletion_labels(cand, ref, protect)
        assert script_cost(script) == oracle_min_indel(cand, ref, protect)


class TestInsertionLabels:
    def test_frozen_middle_gap(self):
        record = FragmentRecord(("a", "c"), (0, 2))
        counts, fills = insertion_labels(record, ("a", "b", "c"))
        assert counts == (0, 1, 0)
        assert fills == ("b",)

    def test_empty_fragment_single_slot(self):
        counts, fills = insertion_labels(FragmentRecord((), ()), ("a", "b", "c"))
        assert counts == (3,)
        assert fills == ("a", "b", "c")

    def test_gap_overflow_raises(self):
        with pytest.raises(PlaceholderOverflowError):
            insertion_labels(FragmentRecord((), ()), ("a", "b", "c"), k_max=2)
        counts, _ = insertion_labels(FragmentRecord((), ()), ("a", "b", "c"), k_max=3)
        assert counts == (3,)

    def test_invalid_record_rejected(self):
        with pytest.raises(ValueError):
            insertion_labels(FragmentRecord(("b",), (0,)), ("a", "b"))
        with pytest.raises(ValueError):
            insertion_labels(FragmentRecord(("a", "a"), (0, 0)), ("a", "a"))

    @given(st.lists(st.integers(0, 4), min_size=1, max_size=10), st.data())
    @settings(max_examples=200, deadline=None)
    def test_counts_and_fills_reconstruct(self, ref, data):
        ref = tuple(ref)
        kept = tuple(
            sorted(
                data.draw(
                    st.sets(st.integers(0, len(ref) - 1), max_size=len(ref))
                )
            )
        )
        record = FragmentRecord(tuple(ref[i] for i in kept), kept)
        counts, fills = insertion_labels(record, ref)
        assert len(counts) == len(record.fragment) + 1
        assert sum(counts) == len(fills) == len(ref) - len(kept)
        rebuilt = apply_edit_script(
            record.fragment,
            EditScript((KEEP,) * len(record.fragment), counts, fills),
        )
        assert rebuilt == ref


class TestCorruptForInsertion:
    def test_prob_zero_keeps_all(self):
        rng = np.random.default_rng(0)
        ref = tuple("abcdef")
        record = corrupt_for_insertion(ref, (False,) * 6, 0.0, rng)
        assert record.fragment == ref
        assert record.kept_positions == tuple(range(6))

    def test_prob_one_keeps_only_protected(self):
        rng = np.random.default_rng(0)
        ref = tuple("abcdef")
        protect = (False, True, False, False, True, False)
        record = corrupt_for_insertion(ref, protect, 1.0, rng)
        assert record.kept_positions == (1, 4)
        assert record.fragment == ("b", "e")

    def test_gap_repair_bounds_every_gap(self):
        ref = tuple(range(23))
        rng = np.random.default_rng(0)
        record = corrupt_for_insertion(ref, (False,) * 23, 1.0, rng, k_max=3)
        counts, _ = insertion_labels(record, ref)
        assert max(counts) <= 3
        # repair must not resurrect more than needed: some gap is exactly full
        assert max(counts) > 0

    def test_deletion_rate_statistics(self):
        rng = np.random.default_rng(7)
        ref = tuple(range(50))
        kept = 0
        for _ in range(400):
            record = corrupt_for_insertion(ref, (False,) * 50, 0.3, rng)
            kept += len(record.fragment)
        rate = kept / (400 * 50)
        assert rate == pytest.approx(0.7, abs=0.02)

    def test_reproducible_for_equal_seeds(self):
        ref = tuple(range(30))
        a = corrupt_for_insertion(ref, (False,) * 30, 0.5, np.random.default_rng(3))
        b = corrupt_for_insertion(ref, (False,) * 30, 0.5, np.random.default_rng(3))
        assert a == b

    def test_bad_probability_rejected(self):
        with pytest.raises(ValueError):
            corrupt_for_insertion(("a",), (False,), 1.5, np.random.default_rng(0))


class TestOptimalEditScript:
    def test_identity_is_empty_script(self):
        cur = ("a", "b")
        script = optimal_edit_script(cur, cur, (False, False))
        assert script.del_labels == (KEEP, KEEP)
        assert script.placeholder_counts == (0, 0, 0)
        assert script.token_fills == ()
        assert apply_edit_script(cur, script) == cur

    def test_frozen_protected_expansion(self):
        script = optimal_edit_script(("c1",), ("a", "c1", "b"), (True,))
        assert script.del_labels == (KEEP,)
        assert script.placeholder_counts == (1, 1)
        assert script.token_fills == ("a", "b")
        assert apply_edit_script(("c1",), script) == ("a", "c1", "b")

    def test_overflow_propagates(self):
        with pytest.raises(PlaceholderOverflowError):
            optimal_edit_script((), ("a", "b", "c"), (), k_max=2)

    def test_unsatisfiable_protection_keeps_tokens(self):
        # "z" never occurs in the target: the script keeps it and does not
        # reconstruct, by design
        script = optimal_edit_script(("z", "a"), ("a", "b"), (True, False))
        assert script.del_labels == (KEEP, KEEP)
        out = apply_edit_script(("z", "a"), script)
        assert "z" in out

    @given(st.data())
    @settings(max_examples=300, deadline=None)
    def test_reconstruction_with_satisfiable_protection(self, data):
        # build current = interleaving of a target subsequence (protected)
        # and noise tokens, mirroring how training inputs arise
        target = tuple(data.draw(st.lists(st.integers(0, 4), max_size=8)))
        kept = sorted(
            data.draw(st.sets(st.integers(0, max(len(target) - 1, 0)), max_size=4))
        ) if target else []
        pieces = [(target[i], True) for i in kept]
        noise = data.draw(st.lists(st.integers(0, 4), max_size=4))
        for tok in noise:
            at = data.draw(st.integers(0, len(pieces)))
            pieces.insert(at, (tok, False))
        current = tuple(t for t, _ in pieces)
        protect = tuple(p for _, p in pieces)
        script = optimal_edit_script(current, target, protect)
        assert apply_edit_script(current, script) == target
        for lab, prot in zip(script.del_labels, protect):
            if prot:
                assert lab == KEEP

    @given(
        st.lists(st.integers(0, 2), max_size=6),
        st.lists(st.integers(0, 2), max_size=6),
    )
    @settings(max_examples=200, deadline=None)
    def test_minimality_without_protection(self, cur, tgt):
        cur, tgt = tuple(cur), tuple(tgt)
        script = optimal_edit_script(cur, tgt, (False,) * len(cur))
        assert apply_edit_script(cur, script) == tgt
        assert script_cost(script) == oracle_min_indel(cur, tgt, (False,) * len(cur))

    def test_deterministic(self):
        cur, tgt = ("a", "b", "a", "b"), ("b", "a")
        first = optimal_edit_script(cur, tgt, (False,) * 4)
        for _ in range(5):
            assert optimal_edit_script(cur, tgt, (False,) * 4) == first
