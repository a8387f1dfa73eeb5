"""Iterative edit-based decoding with optional lexical constraints.

Each iteration runs three decoder passes over the working sequence: delete,
open placeholders, fill placeholders.  Decoding stops when an iteration
leaves the sequence unchanged or the iteration budget runs out.

Constraint handling by mode:
  none  start from an empty frame, constraints ignored
  soft  start from the concatenated constraints, all tokens deletable
  hard  same start, constraint tokens cannot be deleted and no insertion
        slot inside a multi-token constraint ever opens, so every
        constraint survives contiguously and in order
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import BOS_ID, EOS_ID, PAD_ID, PLH_ID, Sentence
from .network import (
    ModelConfig,
    decoder_forward,
    deletion_logits,
    encode,
    placeholder_logits,
    token_logits,
)
from .oracle import DELETE
from .validation import DataError

MODES = ("none", "soft", "hard")

# ids the token head must never emit into the output
STRUCTURAL_IDS = (PAD_ID, BOS_ID, EOS_ID, PLH_ID)


@dataclass(frozen=True)
class DecodeConfig:
    mode: str = "soft"
    max_iterations: int = 10
    length_cap: int = 200

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.length_cap < 2:
            raise ValueError("length_cap must fit the frame tokens")


@dataclass(frozen=True)
class DecodeState:
    """Framed working sequence plus per-position bookkeeping."""

    sequence: tuple
    protected: tuple
    span_ids: tuple
    iteration: int = 0
    converged: bool = False
    truncated: bool = False

    @property
    def output(self) -> Sentence:
        return self.sequence[1:-1]


def init_state(constraints: Sequence[Sentence] | None, mode: str) -> DecodeState:
    """Initial frame; constraint k gets span id k+1 on each of its tokens."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    seq = [BOS_ID]
    protected = [True]
    span_ids = [0]
    if mode != "none" and constraints:
        for k, span in enumerate(constraints):
            if not span:
                raise DataError("empty constraint span")
            seq.extend(span)
            protected.extend([mode == "hard"] * len(span))
            span_ids.extend([k + 1] * len(span))
    seq.append(EOS_ID)
    protected.append(True)
    span_ids.append(0)
    return DecodeState(tuple(seq), tuple(protected), tuple(span_ids))


def _truncate_counts(counts, current_len: int, cap: int) -> tuple:
    """Reduce insertion counts right to left until the result fits the cap.

    Existing tokens are never dropped, so the sequence can stay above the
    cap if it already was; only growth is curbed.
    """
    budget = cap - current_len
    total = int(counts.sum())
    if total <= max(budget, 0):
        return counts, False
    counts = counts.copy()
    excess = total - max(budget, 0)
    for slot in range(len(counts) - 1, -1, -1):
        take = min(int(counts[slot]), excess)
        counts[slot] -= take
        excess -= take
        if excess == 0:
            break
    return counts, True


def decode_iteration(
    state: DecodeState,
    enc_states,
    params: dict,
    cfg: ModelConfig,
    dcfg: DecodeConfig,
) -> DecodeState:
    """One delete / insert / fill sweep; three decoder passes."""
    before = state.sequence
    cap = min(dcfg.length_cap, cfg.max_len)

    # pass 1: deletion
    hidden = decoder_forward(enc_states, state.sequence, params, cfg)
    seq = [state.sequence[0]]
    protected = [True]
    span_ids = [0]
    if len(state.sequence) > 2:
        labels = deletion_logits(hidden, params).argmax(axis=1)
        for offset, label in enumerate(labels):
            pos = offset + 1
            if label == DELETE and not state.protected[pos]:
                continue
            seq.append(state.sequence[pos])
            protected.append(state.protected[pos])
            span_ids.append(state.span_ids[pos])
    seq.append(state.sequence[-1])
    protected.append(True)
    span_ids.append(0)

    # pass 2: placeholder insertion
    hidden = decoder_forward(enc_states, seq, params, cfg)
    counts = placeholder_logits(hidden, params).argmax(axis=1)
    if dcfg.mode == "hard":
        for slot in range(len(counts)):
            left, right = span_ids[slot], span_ids[slot + 1]
            if left == right and left != 0:
                counts[slot] = 0
    counts, clipped = _truncate_counts(counts, len(seq), cap)
    grown = [seq[0]]
    grown_prot = [True]
    grown_span = [0]
    for slot, count in enumerate(counts):
        grown.extend([PLH_ID] * int(count))
        grown_prot.extend([False] * int(count))
        grown_span.extend([0] * int(count))
        grown.append(seq[slot + 1])
        grown_prot.append(protected[slot + 1])
        grown_span.append(span_ids[slot + 1])

    # pass 3: token fill
    positions = [i for i, tok in enumerate(grown) if tok == PLH_ID]
    if positions:
        hidden = decoder_forward(enc_states, grown, params, cfg)
        logits = token_logits(hidden, positions, params)
        logits[:, list(STRUCTURAL_IDS)] = -np.inf
        fills = logits.argmax(axis=1)
        for at, tok in zip(positions, fills):
            grown[at] = int(tok)

    sequence = tuple(grown)
    return DecodeState(
        sequence=sequence,
        protected=tuple(grown_prot),
        span_ids=tuple(grown_span),
        iteration=state.iteration + 1,
        converged=sequence == before,
        truncated=state.truncated or clipped,
    )


def run_decode(
    source: Sentence,
    constraints: Sequence[Sentence] | None,
    labels: Sequence[int] | None,
    params: dict,
    cfg: ModelConfig,
    dcfg: DecodeConfig,
) -> DecodeState:
    """Full refinement loop; returns the final state with iteration count."""
    if len(source) > cfg.max_len:
        raise DataError(
            f"source length {len(source)} exceeds model max_len {cfg.max_len}"
        )
    if labels is None:
        labels = [0] * len(source)
    state = init_state(constraints, dcfg.mode)
    if len(state.sequence) > min(dcfg.length_cap, cfg.max_len):
        raise DataError(
            f"constraints occupy {len(state.sequence)} slots, beyond the "
            f"decoding cap {min(dcfg.length_cap, cfg.max_len)}"
        )
    enc_states = encode(source, labels, params, cfg)
    while not state.converged and state.iteration < dcfg.max_iterations:
        state = decode_iteration(state, enc_states, params, cfg, dcfg)
    return state


def decode(
    source: Sentence,
    constraints: Sequence[Sentence] | None,
    labels: Sequence[int] | None,
    params: dict,
    cfg: ModelConfig,
    dcfg: DecodeConfig,
) -> Sentence:
    """Translate one sentence; the frame tokens are stripped from the result."""
    return run_decode(source, constraints, labels, params, cfg, dcfg).output
