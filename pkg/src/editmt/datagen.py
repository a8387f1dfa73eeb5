"""Imitation-learning example construction.

Each parallel pair yields one example holding two supervised views of the
target: an insertion view (a fragment of the reference plus the expert
placeholder counts and fill tokens that complete it) and a deletion view
(the reference with random noise insertions plus the expert keep/delete
labels).  Pseudo terms sampled by tf-idf weight are protected in both
views, and optionally aligned back to source positions to produce the
label vector consumed by the encoder.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .align import alignment_labels
from .corpus import N_RESERVED
from .oracle import deletion_labels, corrupt_for_insertion, insertion_labels
from .validation import DataError

VARIANTS = ("baseline", "ct", "act")


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs for example construction."""

    deletion_prob: float = 0.5
    noise_rate: float = 0.15
    k_max: int = 8
    max_terms: int = 3
    max_len: int = 64


@dataclass(frozen=True)
class TrainingExample:
    source: tuple
    target: tuple
    align_labels: tuple
    term_spans: tuple  # (start, end) per pseudo term, in target coordinates
    fragment: tuple
    fragment_protect: tuple
    placeholder_counts: tuple
    token_fills: tuple
    candidate: tuple
    candidate_protect: tuple
    del_labels: tuple


def sample_pseudo_terms(
    target: Sequence,
    scores,
    rng,
    max_terms: int = 3,
    n_terms: int | None = None,
):
    """Sample up to max_terms single-word pseudo constraints.

    The number of terms is uniform over {0..max_terms} (capped by the number
    of positions with positive score) unless n_terms is forced.  Positions
    are drawn without replacement with probability proportional to score.
    Returns (constraints, spans) ordered by target position.
    """
    if len(scores) != len(target):
        raise ValueError("score vector does not match the target sentence")
    if n_terms is None:
        n_terms = int(rng.integers(0, max_terms + 1))
    positive = [i for i in range(len(target)) if scores[i] > 0.0]
    n_terms = min(n_terms, len(positive))
    if n_terms == 0:
        return (), ()
    weights = [scores[i] for i in positive]
    total = sum(weights)
    picks = rng.choice(
        positive, size=n_terms, replace=False, p=[w / total for w in weights]
    )
    spans = tuple((int(p), int(p) + 1) for p in sorted(picks))
    constraints = tuple((target[start],) for start, _ in spans)
    return constraints, spans


def unigram_noise_weights(
    targets: Sequence, vocab_size: int, uniform_mix: float = 0.0
):
    """Empirical target unigram distribution for noise sampling.

    Uniform noise over a tiny vocabulary floods every id with delete-labeled
    appearances, which a realistic-scale vocabulary never does; sampling
    noise by corpus frequency keeps rare ids rare everywhere.  A nonzero
    `uniform_mix` blends in a uniform floor over non-reserved ids so no id
    is entirely exempt from deletion training.  Returns None when the corpus
    has no non-reserved tokens (callers fall back to uniform sampling).
    """
    counts = np.zeros(vocab_size, dtype=np.float64)
    for sent in targets:
        for tok in sent:
            if tok >= N_RESERVED:
                counts[tok] += 1.0
    total = counts.sum()
    if total == 0:
        return None
    weights = counts / total
    if uniform_mix > 0.0 and vocab_size > N_RESERVED:
        floor = np.zeros(vocab_size, dtype=np.float64)
        floor[N_RESERVED:] = 1.0 / (vocab_size - N_RESERVED)
        weights = (1.0 - uniform_mix) * weights + uniform_mix * floor
    return weights


def _insert_noise(
    target: Sequence, rng, noise_rate: float, vocab_size: int, weights=None
):
    """Reference with random tokens inserted; returns (candidate, origin).

    origin[i] is the target position a candidate token came from, or -1 for
    noise.  One noise token may appear in each of the len+1 insertion slots.
    Noise ids are uniform over the non-reserved vocabulary unless `weights`
    gives a distribution over all ids.
    """
    n = len(target)
    gate = rng.random(n + 1)
    if weights is None:
        noise = rng.integers(N_RESERVED, max(vocab_size, N_RESERVED + 1), size=n + 1)
    else:
        noise = rng.choice(vocab_size, size=n + 1, p=weights)
    candidate = []
    origin = []
    for slot in range(n + 1):
        if gate[slot] < noise_rate:
            candidate.append(int(noise[slot]))
            origin.append(-1)
        if slot < n:
            candidate.append(target[slot])
            origin.append(slot)
    return tuple(candidate), tuple(origin)


def build_training_example(
    pair,
    scores,
    rng,
    config: PipelineConfig,
    vocab_size: int,
    aligner=None,
    pair_index: int | None = None,
    with_terms: bool = True,
    with_alignment: bool = False,
    noise_weights=None,
) -> TrainingExample:
    """One imitation-learning example from a parallel pair.

    with_terms=False skips pseudo-term sampling entirely (no rng draws);
    with_alignment=True additionally maps the sampled terms to source
    positions via the aligner and emits the per-source-token labels.
    """
    source, target = pair
    if len(target) + 2 > config.max_len:
        raise DataError(
            f"target of length {len(target)} does not fit max_len {config.max_len}"
        )
    if with_terms:
        constraints, spans = sample_pseudo_terms(
            target, scores, rng, max_terms=config.max_terms
        )
    else:
        constraints, spans = (), ()
    protect = [False] * len(target)
    for start, end in spans:
        for i in range(start, end):
            protect[i] = True
    protect = tuple(protect)

    record = corrupt_for_insertion(
        target, protect, config.deletion_prob, rng, k_max=config.k_max
    )
    counts, fills = insertion_labels(record, target, k_max=config.k_max)
    fragment_protect = tuple(protect[p] for p in record.kept_positions)

    candidate, origin = _insert_noise(
        target, rng, config.noise_rate, vocab_size, weights=noise_weights
    )
    if len(candidate) + 2 > config.max_len:
        candidate, origin = target, tuple(range(len(target)))
    candidate_protect = tuple(o >= 0 and protect[o] for o in origin)
    labels = deletion_labels(candidate, target, candidate_protect)

    if with_alignment and constraints and aligner is not None:
        aligned = aligner.align_spans(source, target, spans, index=pair_index)
        align = alignment_labels(len(source), aligned)
    else:
        align = (0,) * len(source)

    return TrainingExample(
        source=tuple(source),
        target=tuple(target),
        align_labels=align,
        term_spans=spans,
        fragment=record.fragment,
        fragment_protect=fragment_protect,
        placeholder_counts=counts,
        token_fills=fills,
        candidate=candidate,
        candidate_protect=candidate_protect,
        del_labels=labels,
    )


def example_to_json(example: TrainingExample) -> str:
    payload = {
        k: [int(x) for x in v] if k != "term_spans" else [[int(a), int(b)] for a, b in v]
        for k, v in asdict(example).items()
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def example_from_json(line: str) -> TrainingExample:
    payload = json.loads(line)
    try:
        return TrainingExample(
            source=tuple(payload["source"]),
            target=tuple(payload["target"]),
            align_labels=tuple(payload["align_labels"]),
            term_spans=tuple((a, b) for a, b in payload["term_spans"]),
            fragment=tuple(payload["fragment"]),
            fragment_protect=tuple(bool(x) for x in payload["fragment_protect"]),
            placeholder_counts=tuple(payload["placeholder_counts"]),
            token_fills=tuple(payload["token_fills"]),
            candidate=tuple(payload["candidate"]),
            candidate_protect=tuple(bool(x) for x in payload["candidate_protect"]),
            del_labels=tuple(payload["del_labels"]),
        )
    except KeyError as missing:
        raise DataError(f"dataset line is missing field {missing}") from None


def write_dataset(path, examples: Sequence) -> None:
    Path(path).write_text(
        "".join(example_to_json(ex) + "\n" for ex in examples), encoding="utf-8"
    )


def read_dataset(path) -> list:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing dataset file: {path}")
    return [
        example_from_json(line)
        for line in path.read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
