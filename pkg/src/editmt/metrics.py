"""Corpus BLEU, term usage rate, and constraint-construction analysis tools.

BLEU here is corpus-level BLEU-4: modified n-gram precisions pooled over the
whole corpus, geometric mean, multiplicative brevity penalty, no smoothing
(any pooled zero precision gives 0), case-sensitive, single reference.  The
evaluation report records this so numbers stay comparable across runs.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .seeding import substream
from .validation import DataError, check_same_length

BLEU_NOTE = "corpus BLEU-4, case-sensitive, single reference, no smoothing"
N_BUCKETS = 6
CONSTRAINT_ORDERS = ("frequency", "tfidf")


def _ngram_counts(tokens: Sequence, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu_statistics(hypotheses: Sequence, references: Sequence):
    """Pooled (numerators, denominators, hyp_len, ref_len) for orders 1..4."""
    check_same_length(hypotheses, references, "hypotheses", "references")
    if len(hypotheses) == 0:
        raise DataError("cannot score an empty corpus")
    numerators = [0, 0, 0, 0]
    denominators = [0, 0, 0, 0]
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp = tuple(hyp)
        ref = tuple(ref)
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, 5):
            counts = _ngram_counts(hyp, n)
            if not counts:
                continue
            seen = _ngram_counts(ref, n)
            denominators[n - 1] += len(hyp) - n + 1
            numerators[n - 1] += sum(
                min(count, seen[gram]) for gram, count in counts.items()
            )
    return numerators, denominators, hyp_len, ref_len


def corpus_bleu(hypotheses: Sequence, references: Sequence) -> float:
    """0-100; sentences shorter than n contribute nothing to p_n."""
    numerators, denominators, hyp_len, ref_len = bleu_statistics(hypotheses, references)
    if any(num == 0 for num in numerators):
        return 0.0
    log_precision = sum(
        math.log(num / den) for num, den in zip(numerators, denominators)
    ) / 4.0
    brevity = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * brevity * math.exp(log_precision)


def _contains(hypothesis: Sequence, span: Sequence) -> bool:
    hypothesis = tuple(hypothesis)
    span = tuple(span)
    width = len(span)
    return any(
        hypothesis[i : i + width] == span for i in range(len(hypothesis) - width + 1)
    )


def term_usage_rate(hypotheses: Sequence, constraint_sets: Sequence) -> float:
    """Percentage of constraints whose tokens appear contiguously, in order."""
    check_same_length(hypotheses, constraint_sets, "hypotheses", "constraint sets")
    used = 0
    total = 0
    for hyp, constraints in zip(hypotheses, constraint_sets):
        for span in constraints:
            total += 1
            used += _contains(hyp, span)
    if total == 0:
        raise DataError("term usage rate is undefined without constraints")
    return 100.0 * used / total


def token_accuracy(hypotheses: Sequence, references: Sequence) -> float:
    """Percentage of positions whose tokens match exactly.

    Positions are compared in place; the denominator uses the longer side,
    so length mismatches count against the score.
    """
    check_same_length(hypotheses, references, "hypotheses", "references")
    matched = 0
    total = 0
    for hyp, ref in zip(hypotheses, references):
        hyp = tuple(hyp)
        ref = tuple(ref)
        matched += sum(a == b for a, b in zip(hyp, ref))
        total += max(len(hyp), len(ref))
    if total == 0:
        raise DataError("token accuracy is undefined on empty corpora")
    return 100.0 * matched / total


def word_frequencies(lines) -> Counter:
    """Lowercased word counts; absent words look up as 0."""
    table: Counter = Counter()
    for line in lines:
        words = line.split() if isinstance(line, str) else line
        table.update(w.lower() for w in words)
    return table


def bucket_sizes(n_words: int, n_buckets: int = N_BUCKETS) -> tuple:
    """Contiguous partition sizes, earlier buckets take the remainder."""
    base, extra = divmod(n_words, n_buckets)
    return tuple(base + (1 if b < extra else 0) for b in range(n_buckets))


def bucket_words(
    reference: Sequence[str],
    freq: Counter,
    order: str = "frequency",
    scores: Sequence[float] | None = None,
):
    """Six contiguous word buckets, or None for references under six words.

    frequency order ranks by training frequency descending, tfidf order by
    score ascending, so the rarest-flavoured bucket comes last either way.
    Earlier buckets take the remainder when the length is not divisible.
    """
    if order not in CONSTRAINT_ORDERS:
        raise ValueError(f"order must be one of {CONSTRAINT_ORDERS}, got {order!r}")
    reference = tuple(reference)
    n = len(reference)
    if n < N_BUCKETS:
        return None
    if order == "frequency":
        ranked = sorted(reference, key=lambda w: -freq[w.lower()])
    else:
        if scores is None or len(scores) != n:
            raise DataError("tfidf order needs one score per reference word")
        ranked = [w for _, w in sorted(zip(scores, reference), key=lambda p: p[0])]
    buckets = []
    at = 0
    for size in bucket_sizes(n):
        buckets.append(tuple(ranked[at : at + size]))
        at += size
    return tuple(buckets)


def build_self_constraints(
    reference: Sequence[str],
    freq: Counter,
    order: str = "frequency",
    scores: Sequence[float] | None = None,
    exclude_unk: bool = False,
    known=None,
    seed: int = 0,
    index: int = 0,
):
    """One single-word constraint per bucket, or None for short references.

    Each pick is uniform within its bucket with a stream keyed by
    (seed, index).  With exclude_unk, words outside `known` are skipped
    and an exhausted bucket yields None in that slot.
    """
    buckets = bucket_words(reference, freq, order=order, scores=scores)
    if buckets is None:
        return None
    rng = substream(seed, "self_constraints", index)
    picks = []
    for bucket in buckets:
        if exclude_unk:
            bucket = [w for w in bucket if known is not None and w in known]
        if not bucket:
            picks.append(None)
            continue
        picks.append(bucket[int(rng.integers(len(bucket)))])
    return tuple(picks)


def tertile_split(constraint_sets: Sequence, freq: Counter):
    """(high, medium, low) original-index groups by mean constraint frequency.

    The key is the flat mean over every word of every constraint in the
    sample; ties keep corpus order and remainders go to the earlier groups.
    """
    keys = []
    for i, constraints in enumerate(constraint_sets):
        words = [w for span in constraints for w in span]
        if not words:
            raise DataError(f"sample {i} has no constraint words")
        keys.append(sum(freq[w.lower()] for w in words) / len(words))
    ranked = sorted(range(len(keys)), key=lambda i: (-keys[i], i))
    base, extra = divmod(len(ranked), 3)
    groups = []
    at = 0
    for g in range(3):
        size = base + (1 if g < extra else 0)
        groups.append(tuple(ranked[at : at + size]))
        at += size
    return tuple(groups)


def sample_n_constraints(reference: Sequence, n: int, rng) -> tuple:
    """n distinct single-word constraints, uniform, kept in sentence order."""
    reference = tuple(reference)
    if not 1 <= n <= len(reference):
        raise DataError(f"cannot sample {n} constraints from {len(reference)} words")
    positions = sorted(rng.choice(len(reference), size=n, replace=False).tolist())
    return tuple((reference[p],) for p in positions)


@dataclass(frozen=True)
class EvalReport:
    """Corpus scores plus optional per-group breakdown rows."""

    bleu: float
    term_usage: float | None
    n_sentences: int
    breakdown: tuple = ()  # rows of (label, n_samples, bleu, term_usage)
    note: str = field(default=BLEU_NOTE)

    def to_json(self) -> str:
        payload = {
            "bleu": self.bleu,
            "term_usage": self.term_usage,
            "n_sentences": self.n_sentences,
            "note": self.note,
            "breakdown": [
                {
                    "label": label,
                    "n_samples": count,
                    "bleu": bleu,
                    "term_usage": usage,
                }
                for label, count, bleu, usage in self.breakdown
            ],
        }
        return json.dumps(payload, sort_keys=True, indent=2)

    def to_text(self) -> str:
        rows = [
            ("bleu", f"{self.bleu:.2f}"),
            (
                "term_usage",
                "n/a" if self.term_usage is None else f"{self.term_usage:.2f}",
            ),
            ("sentences", str(self.n_sentences)),
        ]
        width = max(len(name) for name, _ in rows)
        lines = [f"# {self.note}"]
        lines += [f"{name.ljust(width)}  {value}" for name, value in rows]
        if self.breakdown:
            lines.append("")
            head = ("label", "n_samples", "bleu", "term_usage")
            table = [head] + [
                (
                    str(label),
                    str(count),
                    f"{bleu:.2f}",
                    "n/a" if usage is None else f"{usage:.2f}",
                )
                for label, count, bleu, usage in self.breakdown
            ]
            widths = [max(len(row[c]) for row in table) for c in range(4)]
            for row in table:
                lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
        return "\n".join(lines) + "\n"

    def breakdown_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["bucket_id", "n_samples", "bleu", "term_usage"])
        for label, count, bleu, usage in self.breakdown:
            writer.writerow([label, count, bleu, "" if usage is None else usage])
        return out.getvalue()
