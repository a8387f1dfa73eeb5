"""Deterministic lexicon-translation task for end-to-end checks.

Fifty source words map bijectively to fifty target words; adjacent target
words swap when their source indices satisfy a fixed local rule.  Thirty-
eight common words carry a Zipf-skewed distribution; the other twelve are
rare by construction, injected into the training split only a fixed number
of times.  A model therefore cannot produce a rare target word reliably on
its own, which is exactly the situation terminology constraints exist for:
the constrained split pairs each sentence with one rare-word constraint.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .seeding import substream

N_WORDS = 50
N_COMMON = 38
ZIPF_EXPONENT = 1.1
MIN_LEN = 3
MAX_LEN = 6


def _word_probs() -> np.ndarray:
    weights = 1.0 / np.power(np.arange(1, N_COMMON + 1, dtype=np.float64), ZIPF_EXPONENT)
    return weights / weights.sum()


_PROBS = _word_probs()


def source_word(i: int) -> str:
    return f"s{i:02d}"


def target_word(j: int) -> str:
    return f"t{j:02d}"


def mapped_index(i: int) -> int:
    return (7 * i + 3) % N_WORDS


def source_index_for(j: int) -> int:
    # 43 is the inverse of 7 modulo 50
    return (43 * (j - 3)) % N_WORDS


# rare TARGET indices: the images of the source indices outside the common set
RARE_TARGETS = tuple(sorted(mapped_index(i) for i in range(N_COMMON, N_WORDS)))


def target_indices(source_idx) -> list:
    """Apply the word mapping, then swap adjacent pairs on the local rule."""
    out = [mapped_index(i) for i in source_idx]
    for p in range(0, len(source_idx) - 1, 2):
        if (source_idx[p] + source_idx[p + 1]) % 3 == 0:
            out[p], out[p + 1] = out[p + 1], out[p]
    return out


def _make_pair(rng) -> tuple:
    length = int(rng.integers(MIN_LEN, MAX_LEN + 1))
    idx = rng.choice(N_COMMON, size=length, p=_PROBS)
    src = [int(i) for i in idx]
    return src, target_indices(src)


def _inject(src: list, rare_target: int, slot: int) -> tuple:
    src = list(src)
    src[slot] = source_index_for(rare_target)
    return src, target_indices(src)


def _lines(src_idx, tgt_idx) -> tuple:
    return (
        " ".join(source_word(i) for i in src_idx),
        " ".join(target_word(j) for j in tgt_idx),
    )


@dataclass(frozen=True)
class LexiconTask:
    """Parallel text lines for one run of the toy task."""

    train_src: tuple
    train_tgt: tuple
    test_src: tuple
    test_tgt: tuple
    constrained_src: tuple
    constrained_tgt: tuple
    constraint_terms: tuple  # one single-word term per constrained pair
    rare_targets: tuple  # the rare target words used as constraints


def lexicon_task(
    seed: int = 0,
    n_train: int = 2000,
    n_test: int = 150,
    n_constrained: int = 150,
    rare_occurrences: int = 1,
) -> LexiconTask:
    """Build train/test/constrained splits from one seed.

    Every rare word is planted into exactly `rare_occurrences` training
    pairs, so it exists in the vocabulary but is far too scarce to learn.
    The test split uses common words only; the constrained split injects
    one rare word per pair and names its translation as the constraint.
    """
    train_rng = substream(seed, "synthetic", "train")
    train = [_make_pair(train_rng) for _ in range(n_train)]
    inject_rng = substream(seed, "synthetic", "inject")
    planted = [
        (int(j), int(inject_rng.integers(n_train)))
        for j in RARE_TARGETS
        for _ in range(rare_occurrences)
    ]
    for rare_target, at in planted:
        src, _ = train[at]
        slot = int(inject_rng.integers(len(src)))
        train[at] = _inject(src, rare_target, slot)

    counts: Counter = Counter()
    for _, tgt in train:
        counts.update(tgt)
    missing = [j for j in range(N_WORDS) if counts[j] == 0]
    if missing:
        # two plants can land on the same slot of the same pair
        raise RuntimeError(f"seed {seed} left target words unseen: {missing}")

    test_rng = substream(seed, "synthetic", "test")
    test = [_make_pair(test_rng) for _ in range(n_test)]

    con_rng = substream(seed, "synthetic", "constrained")
    constrained = []
    terms = []
    for _ in range(n_constrained):
        src, _ = _make_pair(con_rng)
        slot = int(con_rng.integers(len(src)))
        rare_target = int(RARE_TARGETS[int(con_rng.integers(len(RARE_TARGETS)))])
        src, tgt = _inject(src, rare_target, slot)
        assert rare_target in tgt
        constrained.append((src, tgt))
        terms.append(target_word(rare_target))

    train_lines = [_lines(s, t) for s, t in train]
    test_lines = [_lines(s, t) for s, t in test]
    con_lines = [_lines(s, t) for s, t in constrained]
    return LexiconTask(
        train_src=tuple(s for s, _ in train_lines),
        train_tgt=tuple(t for _, t in train_lines),
        test_src=tuple(s for s, _ in test_lines),
        test_tgt=tuple(t for _, t in test_lines),
        constrained_src=tuple(s for s, _ in con_lines),
        constrained_tgt=tuple(t for _, t in con_lines),
        constraint_terms=tuple(terms),
        rare_targets=tuple(target_word(j) for j in RARE_TARGETS),
    )
