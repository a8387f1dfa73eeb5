"""Edit-distance expert policy for sequence editing.

Given a working sequence and the reference it should become, the expert
answers three questions: which tokens to delete, how many placeholder slots
to open between the survivors, and which token fills each placeholder.
Substitutions are decomposed into a deletion plus an insertion, so a script
is fully described by per-token keep/delete labels, per-slot insertion
counts, and the fill tokens in left-to-right order.

Protected positions (lexical constraints) are never labelled for deletion.
When the protected tokens cannot all be matched against the reference in
order, they are still kept; the resulting script then no longer reconstructs
the reference.  Data generation never produces such inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .validation import check_probability

KEEP = 0
DELETE = 1


@dataclass(frozen=True)
class FragmentRecord:
    """A subsequence of some reference plus the positions it was taken from."""

    fragment: tuple
    kept_positions: tuple


@dataclass(frozen=True)
class EditScript:
    """One expert edit step: deletions, then placeholder counts, then fills.

    del_labels has one KEEP/DELETE entry per current token.
    placeholder_counts has one entry per slot of the framed survivor
    sequence (len(survivors) + 1 slots).  token_fills lists the inserted
    tokens left to right, sum(placeholder_counts) of them.
    """

    del_labels: tuple
    placeholder_counts: tuple
    token_fills: tuple


class PlaceholderOverflowError(ValueError):
    """A slot would need more insertions than the model can open at once."""


def levenshtein_distance(a: Sequence, b: Sequence) -> int:
    """Minimal number of single-token insertions, deletions, substitutions."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, tok_a in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, tok_b in enumerate(b, start=1):
            cost = 0 if tok_a == tok_b else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev = cur
    return prev[len(b)]


def _monotone_match(candidate: Sequence, reference: Sequence, protect: Sequence):
    """Best monotone matching of candidate tokens onto the reference.

    Maximises the number of matched tokens; leaving a protected position
    unmatched costs more than any achievable gain, so protected tokens are
    matched whenever order allows.  The forward walk prefers matching at the
    earliest candidate/reference positions, which makes ties deterministic.

    Returns (keep, pos): keep[i] says candidate[i] survives, pos[i] is its
    matched reference index or None.
    """
    n, m = len(candidate), len(reference)
    big = n + m + 1
    width = m + 1
    # dp[i][j] = best score for suffixes candidate[i:], reference[j:],
    # score = matches - big * (protected tokens left unmatched)
    dp = [[0] * width for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        tok = candidate[i]
        pen = big if protect[i] else 0
        row, below = dp[i], dp[i + 1]
        row[m] = below[m] - pen
        for j in range(m - 1, -1, -1):
            best = below[j] - pen
            skip = row[j + 1]
            if skip > best:
                best = skip
            if tok == reference[j]:
                diag = below[j + 1] + 1
                if diag > best:
                    best = diag
            row[j] = best

    keep = [False] * n
    pos: list = [None] * n
    i = j = 0
    while i < n:
        row = dp[i]
        if j < m and candidate[i] == reference[j] and row[j] == dp[i + 1][j + 1] + 1:
            keep[i] = True
            pos[i] = j
            i += 1
            j += 1
        elif j < m and row[j] == row[j + 1]:
            j += 1
        else:
            keep[i] = bool(protect[i])
            i += 1
    return keep, pos


def _check_protect(seq: Sequence, protect: Sequence, what: str) -> None:
    if len(protect) != len(seq):
        raise ValueError(
            f"protection mask length {len(protect)} != {what} length {len(seq)}"
        )


def deletion_labels(candidate: Sequence, reference: Sequence, protect: Sequence) -> tuple:
    """KEEP/DELETE per candidate token.

    Kept tokens form a subsequence of the reference chosen so that the total
    number of deletions plus later insertions is minimal; protected tokens
    are always KEEP.
    """
    _check_protect(candidate, protect, "candidate")
    keep, _ = _monotone_match(candidate, reference, protect)
    return tuple(KEEP if k else DELETE for k in keep)


def insertion_labels(record: FragmentRecord, reference: Sequence, k_max: int | None = None):
    """Per-slot insertion counts and fill tokens completing record to reference.

    Slot k sits before fragment token k; the final slot sits after the last
    fragment token.  Raises PlaceholderOverflowError if any slot needs more
    than k_max insertions.
    """
    kept = record.kept_positions
    m = len(reference)
    if len(kept) != len(record.fragment):
        raise ValueError("fragment and kept_positions lengths differ")
    last = -1
    for tok, p in zip(record.fragment, kept):
        if not last < p < m:
            raise ValueError(f"kept_positions not strictly increasing in range: {kept}")
        if reference[p] != tok:
            raise ValueError(f"fragment token {tok!r} != reference[{p}]")
        last = p

    counts = []
    fills = []
    last = -1
    for p in kept:
        counts.append(p - last - 1)
        fills.extend(reference[last + 1 : p])
        last = p
    counts.append(m - 1 - last)
    fills.extend(reference[last + 1 :])
    if k_max is not None:
        over = max(counts)
        if over > k_max:
            raise PlaceholderOverflowError(
                f"slot needs {over} insertions but k_max is {k_max}"
            )
    return tuple(counts), tuple(fills)


def corrupt_for_insertion(
    reference: Sequence,
    protect: Sequence,
    deletion_prob: float,
    rng,
    k_max: int | None = None,
) -> FragmentRecord:
    """Random fragment of the reference for insertion training.

    Each unprotected token is dropped independently with deletion_prob;
    protected tokens always survive.  If k_max is given, any gap of more
    than k_max consecutive drops is repaired by re-keeping its middle token
    until every gap fits.
    """
    _check_protect(reference, protect, "reference")
    check_probability(deletion_prob, "deletion_prob")
    n = len(reference)
    draws = rng.random(n)
    keep = [bool(protect[i]) or draws[i] >= deletion_prob for i in range(n)]
    if k_max is not None:
        _repair_gaps(keep, k_max)
    kept = tuple(i for i in range(n) if keep[i])
    return FragmentRecord(tuple(reference[i] for i in kept), kept)


def _repair_gaps(keep: list, k_max: int) -> None:
    i, n = 0, len(keep)
    while i < n:
        if keep[i]:
            i += 1
            continue
        j = i
        while j < n and not keep[j]:
            j += 1
        _split_gap(keep, i, j, k_max)
        i = j


def _split_gap(keep: list, lo: int, hi: int, k_max: int) -> None:
    if hi - lo <= k_max:
        return
    mid = lo + (hi - lo - 1) // 2
    keep[mid] = True
    _split_gap(keep, lo, mid, k_max)
    _split_gap(keep, mid + 1, hi, k_max)


def optimal_edit_script(
    current: Sequence,
    target: Sequence,
    protect: Sequence,
    k_max: int | None = None,
) -> EditScript:
    """Minimal deletion+insertion script turning current into target.

    Protected tokens are never deleted.  With a satisfiable protection mask,
    apply_edit_script(current, script) reconstructs the target exactly and
    the script uses the minimum possible number of edits.
    """
    _check_protect(current, protect, "current")
    keep, pos = _monotone_match(current, target, protect)
    m = len(target)
    counts = []
    fills = []
    last = -1
    for i in range(len(current)):
        if not keep[i]:
            continue
        p = pos[i]
        if p is None:
            counts.append(0)  # unmatched protected survivor, nothing inserted before it
            continue
        counts.append(p - last - 1)
        fills.extend(target[last + 1 : p])
        last = p
    counts.append(m - 1 - last)
    fills.extend(target[last + 1 :])
    if k_max is not None and max(counts) > k_max:
        raise PlaceholderOverflowError(
            f"slot needs {max(counts)} insertions but k_max is {k_max}"
        )
    return EditScript(
        tuple(KEEP if k else DELETE for k in keep),
        tuple(counts),
        tuple(fills),
    )


def apply_edit_script(current: Sequence, script: EditScript) -> tuple:
    """Replay a script: drop DELETE tokens, then fill each slot left to right."""
    if len(script.del_labels) != len(current):
        raise ValueError("script labels do not match the current sequence")
    survivors = [t for t, lab in zip(current, script.del_labels) if lab == KEEP]
    if len(script.placeholder_counts) != len(survivors) + 1:
        raise ValueError("placeholder counts do not match the survivor count")
    out = []
    fill_at = 0
    for slot, count in enumerate(script.placeholder_counts):
        out.extend(script.token_fills[fill_at : fill_at + count])
        fill_at += count
        if slot < len(survivors):
            out.append(survivors[slot])
    if fill_at != len(script.token_fills):
        raise ValueError("unused fill tokens in script")
    return tuple(out)
