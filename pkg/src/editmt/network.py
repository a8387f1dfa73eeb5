"""Tiny encoder-decoder editing network, single-head, with manual backprop.

The encoder reads the source sentence; each input vector is the sum of a
token embedding, a learned position embedding, and a learned embedding of
the per-token constraint label (label 0 means "not part of any constraint"
and its embedding row starts at zero, so an unlabelled run is identical to
a network without the label pathway).

The decoder reads a working target-side sequence framed by BOS/EOS, with
unmasked self-attention (editing is non-autoregressive) plus cross
attention over the encoder states.  Three linear heads drive editing:

* placeholder head: for each adjacent state pair, how many tokens to
  insert between them (0..k_max classes)
* token head: the vocabulary distribution at placeholder positions
* deletion head: keep/delete for each non-boundary token

All parameters live in one name->array dict whose declaration order is
fixed; gradients come back in an identically shaped dict.  Everything is
float64 numpy, small enough to verify against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import BOS_ID, EOS_ID, PAD_ID, PLH_ID
from .datagen import TrainingExample
from .oracle import DELETE, KEEP

LN_EPS = 1e-5
NEG_INF = -1e9


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 32
    n_layers: int = 2
    k_max: int = 8
    max_len: int = 64
    n_constraint_labels: int = 4
    learning_rate: float = 3e-3
    steps: int = 2000
    batch_size: int = 16
    warmup_steps: int = 400
    seed: int = 0

    @property
    def d_ff(self) -> int:
        return 2 * self.d_model


_clamp_count = 0


def clamp_warning_count() -> int:
    """How many constraint labels were clamped into range so far."""
    return _clamp_count


def param_shapes(cfg: ModelConfig) -> dict:
    """Parameter name -> shape, in the fixed declaration order."""
    d, dff = cfg.d_model, cfg.d_ff
    shapes: dict = {
        "tok_emb": (cfg.vocab_size, d),
        "pos_emb": (cfg.max_len, d),
        "aln_emb": (cfg.n_constraint_labels, d),
    }
    for side, blocks in (("enc", ("att", "ff")), ("dec", ("self", "cross", "ff"))):
        for layer in range(cfg.n_layers):
            ln = 0
            for block in blocks:
                prefix = f"{side}{layer}_{block}"
                if block == "ff":
                    shapes[f"{prefix}1_w"] = (d, dff)
                    shapes[f"{prefix}1_b"] = (dff,)
                    shapes[f"{prefix}2_w"] = (dff, d)
                    shapes[f"{prefix}2_b"] = (d,)
                else:
                    for mat in ("wq", "wk", "wv", "wo"):
                        shapes[f"{prefix}_{mat}"] = (d, d)
                ln += 1
                shapes[f"{side}{layer}_ln{ln}_g"] = (d,)
                shapes[f"{side}{layer}_ln{ln}_b"] = (d,)
    shapes["plh_w"] = (2 * d, cfg.k_max + 1)
    shapes["plh_b"] = (cfg.k_max + 1,)
    shapes["tok_w"] = (d, cfg.vocab_size)
    shapes["tok_b"] = (cfg.vocab_size,)
    shapes["del_w"] = (d, 2)
    shapes["del_b"] = (2,)
    return shapes


def init_params(cfg: ModelConfig) -> dict:
    """Uniform(-0.1, 0.1) weights, zero biases, unit layer-norm gains.

    Row 0 of the label embedding is zeroed so that all-zero labels add
    nothing to the encoder input.
    """
    rng = np.random.default_rng(cfg.seed)
    params: dict = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith("_g"):
            params[name] = np.ones(shape)
        elif name.endswith("_b"):
            params[name] = np.zeros(shape)
        else:
            params[name] = rng.uniform(-0.1, 0.1, size=shape)
    params["aln_emb"][0] = 0.0
    return params


def zero_grads(params: dict) -> dict:
    return {name: np.zeros_like(value) for name, value in params.items()}


# ---------------------------------------------------------------- primitives


def _ln_f(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + LN_EPS)
    xhat = xc * inv
    return g * xhat + b, (xhat, inv)


def _ln_b(dy, g, cache):
    xhat, inv = cache
    dg = (dy * xhat).sum(axis=0)
    db = dy.sum(axis=0)
    dxhat = dy * g
    dx = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dg, db


def _softmax(x):
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _attn_f(xq, xkv, wq, wk, wv, wo, key_mask=None):
    """Single-head scaled dot-product attention; key_mask hides kv rows."""
    if xkv.shape[0] == 0:
        return np.zeros_like(xq), None
    d = xq.shape[-1]
    q = xq @ wq
    k = xkv @ wk
    v = xkv @ wv
    s = (q @ k.T) / np.sqrt(d)
    if key_mask is not None:
        s = np.where(key_mask[None, :], s, NEG_INF)
    a = _softmax(s)
    out = (a @ v) @ wo
    return out, (xq, xkv, q, k, v, a)


def _attn_b(dout, cache, wq, wk, wv, wo, grads, prefix):
    if cache is None:
        return np.zeros_like(dout), None
    xq, xkv, q, k, v, a = cache
    d = xq.shape[-1]
    c = a @ v
    grads[prefix + "_wo"] += c.T @ dout
    dc = dout @ wo.T
    da = dc @ v.T
    dv = a.T @ dc
    ds = a * (da - (da * a).sum(axis=-1, keepdims=True))
    scale = 1.0 / np.sqrt(d)
    dq = (ds @ k) * scale
    dk = (ds.T @ q) * scale
    grads[prefix + "_wq"] += xq.T @ dq
    grads[prefix + "_wk"] += xkv.T @ dk
    grads[prefix + "_wv"] += xkv.T @ dv
    dxq = dq @ wq.T
    dxkv = dk @ wk.T + dv @ wv.T
    return dxq, dxkv


def _ff_f(x, params, prefix):
    pre = x @ params[prefix + "1_w"] + params[prefix + "1_b"]
    act = np.maximum(pre, 0.0)
    out = act @ params[prefix + "2_w"] + params[prefix + "2_b"]
    return out, (x, pre, act)


def _ff_b(dout, cache, params, grads, prefix):
    x, pre, act = cache
    grads[prefix + "2_w"] += act.T @ dout
    grads[prefix + "2_b"] += dout.sum(axis=0)
    dact = dout @ params[prefix + "2_w"].T
    dpre = dact * (pre > 0.0)
    grads[prefix + "1_w"] += x.T @ dpre
    grads[prefix + "1_b"] += dpre.sum(axis=0)
    return dpre @ params[prefix + "1_w"].T


# ------------------------------------------------------------------- encoder


def _clamp_labels(labels: Sequence, n_labels: int) -> list:
    global _clamp_count
    out = []
    for lab in labels:
        if lab >= n_labels:
            _clamp_count += 1
            lab = n_labels - 1
        out.append(int(lab))
    return out


def _encode_f(source: Sequence, labels: Sequence, params: dict, cfg: ModelConfig):
    if len(source) > cfg.max_len:
        raise ValueError(f"source length {len(source)} exceeds max_len {cfg.max_len}")
    if len(labels) != len(source):
        raise ValueError("labels must have one entry per source token")
    labels = _clamp_labels(labels, cfg.n_constraint_labels)
    ids = list(source)
    x = params["tok_emb"][ids] + params["pos_emb"][: len(ids)] + params["aln_emb"][labels]
    layer_caches = []
    for layer in range(cfg.n_layers):
        p = f"enc{layer}"
        att, att_cache = _attn_f(
            x, x,
            params[p + "_att_wq"], params[p + "_att_wk"],
            params[p + "_att_wv"], params[p + "_att_wo"],
        )
        h1, ln1_cache = _ln_f(x + att, params[p + "_ln1_g"], params[p + "_ln1_b"])
        ff, ff_cache = _ff_f(h1, params, p + "_ff")
        x, ln2_cache = _ln_f(h1 + ff, params[p + "_ln2_g"], params[p + "_ln2_b"])
        layer_caches.append((att_cache, ln1_cache, ff_cache, ln2_cache))
    return x, (ids, labels, layer_caches)


def _encode_b(d_states, cache, params: dict, cfg: ModelConfig, grads: dict):
    ids, labels, layer_caches = cache
    dx = d_states
    for layer in range(cfg.n_layers - 1, -1, -1):
        p = f"enc{layer}"
        att_cache, ln1_cache, ff_cache, ln2_cache = layer_caches[layer]
        dr2, dg, db = _ln_b(dx, params[p + "_ln2_g"], ln2_cache)
        grads[p + "_ln2_g"] += dg
        grads[p + "_ln2_b"] += db
        dh1 = dr2 + _ff_b(dr2, ff_cache, params, grads, p + "_ff")
        dr1, dg, db = _ln_b(dh1, params[p + "_ln1_g"], ln1_cache)
        grads[p + "_ln1_g"] += dg
        grads[p + "_ln1_b"] += db
        dxq, dxkv = _attn_b(
            dr1, att_cache,
            params[p + "_att_wq"], params[p + "_att_wk"],
            params[p + "_att_wv"], params[p + "_att_wo"],
            grads, p + "_att",
        )
        dx = dr1 + dxq + (dxkv if dxkv is not None else 0.0)
    np.add.at(grads["tok_emb"], ids, dx)
    grads["pos_emb"][: len(ids)] += dx
    np.add.at(grads["aln_emb"], labels, dx)


def encode(source: Sequence, labels: Sequence, params: dict, cfg: ModelConfig):
    """Encoder states, one d_model vector per source token."""
    states, _ = _encode_f(source, labels, params, cfg)
    return states


# ------------------------------------------------------------------- decoder


def _decoder_f(enc_states, partial: Sequence, params: dict, cfg: ModelConfig):
    if len(partial) > cfg.max_len:
        raise ValueError(f"sequence length {len(partial)} exceeds max_len {cfg.max_len}")
    ids = list(partial)
    key_mask = None
    if PAD_ID in partial:
        key_mask = np.array([tok != PAD_ID for tok in ids])
    y = params["tok_emb"][ids] + params["pos_emb"][: len(ids)]
    layer_caches = []
    for layer in range(cfg.n_layers):
        p = f"dec{layer}"
        att, self_cache = _attn_f(
            y, y,
            params[p + "_self_wq"], params[p + "_self_wk"],
            params[p + "_self_wv"], params[p + "_self_wo"],
            key_mask=key_mask,
        )
        h1, ln1_cache = _ln_f(y + att, params[p + "_ln1_g"], params[p + "_ln1_b"])
        cross, cross_cache = _attn_f(
            h1, enc_states,
            params[p + "_cross_wq"], params[p + "_cross_wk"],
            params[p + "_cross_wv"], params[p + "_cross_wo"],
        )
        h2, ln2_cache = _ln_f(h1 + cross, params[p + "_ln2_g"], params[p + "_ln2_b"])
        ff, ff_cache = _ff_f(h2, params, p + "_ff")
        y, ln3_cache = _ln_f(h2 + ff, params[p + "_ln3_g"], params[p + "_ln3_b"])
        layer_caches.append(
            (self_cache, ln1_cache, cross_cache, ln2_cache, ff_cache, ln3_cache)
        )
    return y, (ids, layer_caches)


def _decoder_b(d_states, cache, enc_states, params: dict, cfg: ModelConfig, grads: dict):
    """Backprop through the decoder; returns the encoder-state gradient."""
    ids, layer_caches = cache
    d_enc = np.zeros_like(enc_states)
    dy = d_states
    for layer in range(cfg.n_layers - 1, -1, -1):
        p = f"dec{layer}"
        self_cache, ln1_cache, cross_cache, ln2_cache, ff_cache, ln3_cache = layer_caches[layer]
        dr3, dg, db = _ln_b(dy, params[p + "_ln3_g"], ln3_cache)
        grads[p + "_ln3_g"] += dg
        grads[p + "_ln3_b"] += db
        dh2 = dr3 + _ff_b(dr3, ff_cache, params, grads, p + "_ff")
        dr2, dg, db = _ln_b(dh2, params[p + "_ln2_g"], ln2_cache)
        grads[p + "_ln2_g"] += dg
        grads[p + "_ln2_b"] += db
        dxq, dxkv = _attn_b(
            dr2, cross_cache,
            params[p + "_cross_wq"], params[p + "_cross_wk"],
            params[p + "_cross_wv"], params[p + "_cross_wo"],
            grads, p + "_cross",
        )
        if dxkv is not None:
            d_enc += dxkv
        dh1 = dr2 + dxq
        dr1, dg, db = _ln_b(dh1, params[p + "_ln1_g"], ln1_cache)
        grads[p + "_ln1_g"] += dg
        grads[p + "_ln1_b"] += db
        dxq, dxkv = _attn_b(
            dr1, self_cache,
            params[p + "_self_wq"], params[p + "_self_wk"],
            params[p + "_self_wv"], params[p + "_self_wo"],
            grads, p + "_self",
        )
        dy = dr1 + dxq + (dxkv if dxkv is not None else 0.0)
    np.add.at(grads["tok_emb"], ids, dy)
    grads["pos_emb"][: len(ids)] += dy
    return d_enc


def decoder_forward(enc_states, partial: Sequence, params: dict, cfg: ModelConfig):
    """Decoder states for a framed working sequence (PAD keys are masked)."""
    states, _ = _decoder_f(enc_states, partial, params, cfg)
    return states


# --------------------------------------------------------------------- heads


def placeholder_logits(hidden, params: dict):
    """(L-1, k_max+1) insertion-count logits for each adjacent state pair."""
    paired = np.concatenate([hidden[:-1], hidden[1:]], axis=1)
    return paired @ params["plh_w"] + params["plh_b"]


def token_logits(hidden, positions: Sequence, params: dict):
    """(len(positions), vocab) fill logits at the given positions."""
    return hidden[list(positions)] @ params["tok_w"] + params["tok_b"]


def deletion_logits(hidden, params: dict):
    """(L-2, 2) keep/delete logits for the non-boundary positions."""
    return hidden[1:-1] @ params["del_w"] + params["del_b"]


def log_softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def sequence_log_prob(logits, targets: Sequence) -> float:
    """Joint log-probability of a label sequence under per-position softmaxes.

    Positions are conditionally independent given the states, so the joint
    is exactly the sum of per-position log-probabilities.
    """
    lp = log_softmax(logits)
    return float(sum(lp[i, t] for i, t in enumerate(targets)))


def _cross_entropy(logits, targets: Sequence):
    """Summed cross entropy and dlogits for integer targets."""
    n = logits.shape[0]
    lp = log_softmax(logits)
    idx = np.arange(n)
    targets = np.asarray(list(targets), dtype=int)
    loss = float(-lp[idx, targets].sum())
    dlogits = np.exp(lp)
    dlogits[idx, targets] -= 1.0
    return loss, dlogits


# ---------------------------------------------------------------------- loss


def plh_sequence(example: TrainingExample) -> tuple:
    """The framed fragment with placeholders opened per the expert counts."""
    seq = [BOS_ID]
    for slot, count in enumerate(example.placeholder_counts):
        seq.extend([PLH_ID] * count)
        if slot < len(example.fragment):
            seq.append(example.fragment[slot])
    seq.append(EOS_ID)
    return tuple(seq)


def _validate_example(example: TrainingExample, cfg: ModelConfig) -> None:
    if max(example.placeholder_counts) > cfg.k_max:
        raise ValueError(
            f"placeholder count {max(example.placeholder_counts)} exceeds "
            f"k_max {cfg.k_max}"
        )
    if any(not 0 <= t < cfg.vocab_size for t in example.token_fills):
        raise ValueError("fill token out of vocabulary range")
    if any(lab not in (KEEP, DELETE) for lab in example.del_labels):
        raise ValueError("deletion labels must be KEEP or DELETE")


def _forward_backward(example: TrainingExample, params: dict, cfg: ModelConfig,
                      want_grads: bool):
    _validate_example(example, cfg)
    grads = zero_grads(params) if want_grads else None
    enc_states, enc_cache = _encode_f(example.source, example.align_labels, params, cfg)
    d_enc = np.zeros_like(enc_states) if want_grads else None
    total = 0.0

    # deletion view
    if example.candidate:
        framed = (BOS_ID,) + tuple(example.candidate) + (EOS_ID,)
        hidden, cache = _decoder_f(enc_states, framed, params, cfg)
        logits = deletion_logits(hidden, params)
        loss, dlogits = _cross_entropy(logits, example.del_labels)
        total += loss
        if want_grads:
            grads["del_w"] += hidden[1:-1].T @ dlogits
            grads["del_b"] += dlogits.sum(axis=0)
            d_hidden = np.zeros_like(hidden)
            d_hidden[1:-1] = dlogits @ params["del_w"].T
            d_enc += _decoder_b(d_hidden, cache, enc_states, params, cfg, grads)

    # placeholder view
    framed = (BOS_ID,) + tuple(example.fragment) + (EOS_ID,)
    hidden, cache = _decoder_f(enc_states, framed, params, cfg)
    logits = placeholder_logits(hidden, params)
    loss, dlogits = _cross_entropy(logits, example.placeholder_counts)
    total += loss
    if want_grads:
        paired = np.concatenate([hidden[:-1], hidden[1:]], axis=1)
        grads["plh_w"] += paired.T @ dlogits
        grads["plh_b"] += dlogits.sum(axis=0)
        d_paired = dlogits @ params["plh_w"].T
        d_hidden = np.zeros_like(hidden)
        d = cfg.d_model
        d_hidden[:-1] += d_paired[:, :d]
        d_hidden[1:] += d_paired[:, d:]
        d_enc += _decoder_b(d_hidden, cache, enc_states, params, cfg, grads)

    # token view
    if example.token_fills:
        seq = plh_sequence(example)
        positions = [i for i, tok in enumerate(seq) if tok == PLH_ID]
        hidden, cache = _decoder_f(enc_states, seq, params, cfg)
        logits = token_logits(hidden, positions, params)
        loss, dlogits = _cross_entropy(logits, example.token_fills)
        total += loss
        if want_grads:
            grads["tok_w"] += hidden[positions].T @ dlogits
            grads["tok_b"] += dlogits.sum(axis=0)
            d_hidden = np.zeros_like(hidden)
            d_hidden[positions] = dlogits @ params["tok_w"].T
            d_enc += _decoder_b(d_hidden, cache, enc_states, params, cfg, grads)

    if want_grads:
        _encode_b(d_enc, enc_cache, params, cfg, grads)
    return total, grads


def loss(example: TrainingExample, params: dict, cfg: ModelConfig) -> float:
    """Summed cross entropy of the three heads against the expert labels."""
    value, _ = _forward_backward(example, params, cfg, want_grads=False)
    return value


def gradients(example: TrainingExample, params: dict, cfg: ModelConfig):
    """(loss, gradient dict) with one entry per parameter."""
    return _forward_backward(example, params, cfg, want_grads=True)
