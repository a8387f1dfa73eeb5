"""Mini-batch training loop, Adam optimiser, and checkpoint serialisation.

Training examples are rebuilt every epoch from the parallel corpus with an
epoch-dependent stream (freeze_examples pins epoch 0), so the model sees
fresh fragments and pseudo terms each pass without sacrificing run-to-run
determinism.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .corpus import PLH_ID, ParallelCorpus
from .datagen import (
    VARIANTS,
    PipelineConfig,
    build_training_example,
    unigram_noise_weights,
)
from .network import (
    ModelConfig,
    decoder_forward,
    gradients,
    init_params,
    param_shapes,
    plh_sequence,
    token_logits,
    zero_grads,
)
from .seeding import substream
from .tfidf import tfidf_scores
from .validation import DataError, DivergenceError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.98
ADAM_EPS = 1e-9

CHECKPOINT_MAGIC = b"ACTM"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<4sI10Id")


def learning_rate(cfg: ModelConfig, step: int) -> float:
    """Linear warmup then inverse square-root decay."""
    warmup = max(cfg.warmup_steps, 1)
    return cfg.learning_rate * min(step / warmup, math.sqrt(warmup / step))


def adam_step(params: dict, grads: dict, m: dict, v: dict, t: int, lr: float) -> None:
    bias1 = 1.0 - ADAM_BETA1**t
    bias2 = 1.0 - ADAM_BETA2**t
    for name, g in grads.items():
        m[name] = ADAM_BETA1 * m[name] + (1.0 - ADAM_BETA1) * g
        v[name] = ADAM_BETA2 * v[name] + (1.0 - ADAM_BETA2) * (g * g)
        params[name] -= lr * (m[name] / bias1) / (np.sqrt(v[name] / bias2) + ADAM_EPS)


def variant_flags(variant: str) -> tuple:
    """(with_terms, with_alignment) for a training variant."""
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    return variant != "baseline", variant == "act"


def train(
    corpus: ParallelCorpus,
    cfg: ModelConfig,
    pipe_cfg: PipelineConfig,
    variant: str = "baseline",
    scores=None,
    aligner=None,
    callback: Callable | None = None,
    freeze_examples: bool = False,
    init: dict | None = None,
):
    """Train for cfg.steps minibatch steps; returns (params, loss_trace).

    callback(step, params, loss) runs after every optimiser step and may
    return a truthy value to stop early.  A non-finite batch loss raises
    DivergenceError carrying the step index.
    """
    with_terms, with_alignment = variant_flags(variant)
    if len(corpus) == 0:
        raise DataError("cannot train on an empty corpus")
    if scores is None:
        scores = tfidf_scores(corpus).scores
    if with_alignment and aligner is None:
        from .align import train_aligner

        aligner = train_aligner(corpus)
    noise_weights = unigram_noise_weights(corpus.targets, cfg.vocab_size)

    params = init if init is not None else init_params(cfg)
    m = zero_grads(params)
    v = zero_grads(params)
    trace: list = []
    step = 0
    epoch = 0
    n = len(corpus)
    while step < cfg.steps:
        order = substream(cfg.seed, "order", epoch).permutation(n)
        data_epoch = 0 if freeze_examples else epoch
        for at in range(0, n, cfg.batch_size):
            if step >= cfg.steps:
                break
            batch = order[at : at + cfg.batch_size]
            batch_grads = zero_grads(params)
            batch_loss = 0.0
            for i in batch:
                example = build_training_example(
                    corpus.pair(int(i)),
                    scores[int(i)],
                    substream(cfg.seed, "datagen", data_epoch, int(i)),
                    pipe_cfg,
                    vocab_size=cfg.vocab_size,
                    aligner=aligner,
                    pair_index=int(i),
                    with_terms=with_terms,
                    with_alignment=with_alignment,
                    noise_weights=noise_weights,
                )
                value, grads = gradients(example, params, cfg)
                batch_loss += value
                for name in batch_grads:
                    batch_grads[name] += grads[name]
            scale = 1.0 / len(batch)
            batch_loss *= scale
            if not math.isfinite(batch_loss):
                raise DivergenceError(step + 1)
            for name in batch_grads:
                batch_grads[name] *= scale
            step += 1
            adam_step(params, batch_grads, m, v, step, learning_rate(cfg, step))
            trace.append(batch_loss)
            if callback is not None and callback(step, params, batch_loss):
                return params, trace
        epoch += 1
    return params, trace


def token_head_accuracy(params: dict, cfg: ModelConfig, examples: Sequence) -> float:
    """Teacher-forced fill accuracy over a set of training examples."""
    from .network import encode

    correct = 0
    total = 0
    for ex in examples:
        if not ex.token_fills:
            continue
        enc_states = encode(ex.source, ex.align_labels, params, cfg)
        seq = plh_sequence(ex)
        positions = [i for i, tok in enumerate(seq) if tok == PLH_ID]
        hidden = decoder_forward(enc_states, seq, params, cfg)
        predicted = token_logits(hidden, positions, params).argmax(axis=1)
        for p, t in zip(predicted, ex.token_fills):
            correct += int(p) == t
            total += 1
    return correct / total if total else 0.0


# -------------------------------------------------------------- checkpoints


def save_checkpoint(path, params: dict, cfg: ModelConfig) -> None:
    """Binary checkpoint: header then float32 tensors in declaration order."""
    header = _HEADER.pack(
        CHECKPOINT_MAGIC,
        CHECKPOINT_VERSION,
        cfg.d_model,
        cfg.n_layers,
        cfg.k_max,
        cfg.max_len,
        cfg.vocab_size,
        cfg.n_constraint_labels,
        cfg.steps,
        cfg.batch_size,
        cfg.warmup_steps,
        cfg.seed,
        cfg.learning_rate,
    )
    chunks = [header]
    for name in param_shapes(cfg):
        chunks.append(np.ascontiguousarray(params[name], dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path):
    """Returns (params, cfg); parameters come back as float64 arrays."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing checkpoint file: {path}")
    blob = path.read_bytes()
    if len(blob) < _HEADER.size or blob[:4] != CHECKPOINT_MAGIC:
        raise DataError(f"{path} is not a model checkpoint")
    fields = _HEADER.unpack_from(blob)
    if fields[1] != CHECKPOINT_VERSION:
        raise DataError(f"unsupported checkpoint version {fields[1]}")
    cfg = ModelConfig(
        d_model=fields[2],
        n_layers=fields[3],
        k_max=fields[4],
        max_len=fields[5],
        vocab_size=fields[6],
        n_constraint_labels=fields[7],
        steps=fields[8],
        batch_size=fields[9],
        warmup_steps=fields[10],
        seed=fields[11],
        learning_rate=fields[12],
    )
    params = {}
    at = _HEADER.size
    for name, shape in param_shapes(cfg).items():
        count = int(np.prod(shape)) if shape else 1
        if at + count * 4 > len(blob):
            raise DataError(f"{path} is truncated at tensor {name}")
        raw = np.frombuffer(blob, dtype="<f4", count=count, offset=at)
        at += count * 4
        params[name] = raw.astype(np.float64).reshape(shape)
    if at != len(blob):
        raise DataError(f"{path} has {len(blob) - at} trailing bytes")
    return params, cfg
