"""Acceptance suite: one test per shipped guarantee, one printed verdict each.

Each test prints "criterion N: PASS/FAIL (detail)" so a log scan shows the
state of every guarantee at a glance.  Budgets are asserted alongside the
quantitative thresholds.
"""

import itertools
import json
import time
from collections import Counter

import numpy as np
import pytest

from editmt.cli import main
from editmt.corpus import N_RESERVED, ParallelCorpus
from editmt.datagen import PipelineConfig, build_training_example
from editmt.decode import DecodeConfig, run_decode
from editmt.estimator import ConstrainedEditTranslator
from editmt.metrics import (
    bucket_words,
    build_self_constraints,
    corpus_bleu,
    term_usage_rate,
    token_accuracy,
    word_frequencies,
)
from editmt.network import ModelConfig, gradients, init_params, loss
from editmt.oracle import DELETE, apply_edit_script, optimal_edit_script
from editmt.seeding import substream
from editmt.synthetic import lexicon_task
from editmt.tfidf import tfidf_scores
from editmt.trainer import train
from editmt.validation import DataError


def report(n: int, ok: bool, detail: str) -> None:
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {n}: {detail}"


# --------------------------------------------------------------- criterion 1


def _lcs_table(group_a: np.ndarray, group_b: np.ndarray) -> np.ndarray:
    """LCS length for every (row of a) x (row of b), fully vectorised."""
    na, la = group_a.shape
    nb, lb = group_b.shape
    a = np.repeat(group_a, nb, axis=0)
    b = np.tile(group_b, (na, 1))
    n = na * nb
    prev = np.zeros((lb + 1, n), dtype=np.int8)
    for i in range(la):
        cur = np.zeros_like(prev)
        for j in range(lb):
            diag = prev[j] + (a[:, i] == b[:, j])
            cur[j + 1] = np.maximum(np.maximum(prev[j + 1], cur[j]), diag)
        prev = cur
    return prev[lb]


def test_criterion_1_oracle_exactness():
    started = time.time()
    by_len = [
        [tuple(s) for s in itertools.product(range(3), repeat=length)]
        for length in range(7)
    ]
    arrays = [np.array(group, dtype=np.int8).reshape(len(group), length)
              for length, group in enumerate(by_len)]

    checked = 0
    worst = None
    for la in range(7):
        for lb in range(7):
            lcs = _lcs_table(arrays[la], arrays[lb])
            at = 0
            for a in by_len[la]:
                protect = (False,) * la
                for b in by_len[lb]:
                    script = optimal_edit_script(a, b, protect)
                    edits = (
                        sum(1 for lab in script.del_labels if lab == DELETE)
                        + len(script.token_fills)
                    )
                    minimal = la + lb - 2 * int(lcs[at])
                    if edits != minimal or apply_edit_script(a, script) != b:
                        worst = (a, b, edits, minimal)
                    at += 1
                    checked += 1
    elapsed = time.time() - started
    report(
        1,
        worst is None and checked == 1093 * 1093 and elapsed < 60.0,
        f"{checked} pairs exhaustive, first mismatch={worst}, {elapsed:.1f}s",
    )


# --------------------------------------------------------------- criterion 2


def test_criterion_2_constraint_protection():
    started = time.time()
    rng = substream(13, "acceptance", "protection")
    vocab_size = 40
    pairs = []
    for _ in range(2500):
        n = int(rng.integers(3, 11))
        tgt = tuple(int(t) for t in rng.integers(N_RESERVED, vocab_size, size=n))
        src = tuple(int(t) for t in rng.integers(N_RESERVED, vocab_size, size=n))
        pairs.append((src, tgt))
    corpus = ParallelCorpus(
        tuple(s for s, _ in pairs), tuple(t for _, t in pairs)
    )
    table = tfidf_scores(corpus)
    pipe = PipelineConfig(deletion_prob=0.7, noise_rate=0.3, k_max=12,
                          max_terms=3, max_len=16)

    examples = 0
    violations = 0
    while examples < 10000:
        i = examples % len(pairs)
        ex = build_training_example(
            corpus.pair(i),
            table.scores[i],
            substream(13, "acceptance", "gen", examples),
            pipe,
            vocab_size=vocab_size,
        )
        examples += 1
        wanted = tuple(
            ex.target[p]
            for start, end in ex.term_spans
            for p in range(start, end)
        )
        # the protected subsequence must survive, in order, into the fragment
        in_fragment = tuple(
            tok for tok, prot in zip(ex.fragment, ex.fragment_protect) if prot
        )
        if in_fragment != wanted:
            violations += 1
        # ... and into the deletion candidate, with every label KEEP
        in_candidate = tuple(
            tok for tok, prot in zip(ex.candidate, ex.candidate_protect) if prot
        )
        if in_candidate != wanted:
            violations += 1
        violations += sum(
            1
            for prot, lab in zip(ex.candidate_protect, ex.del_labels)
            if prot and lab == DELETE
        )
    elapsed = time.time() - started
    report(
        2,
        violations == 0 and examples >= 10000 and elapsed < 30.0,
        f"{examples} examples, {violations} violations, {elapsed:.1f}s",
    )


# --------------------------------------------------------------- criterion 3


def test_criterion_3_hard_mode_term_usage():
    started = time.time()
    cfg = ModelConfig(vocab_size=30, d_model=8, n_layers=1, k_max=4,
                      max_len=24, n_constraint_labels=4, seed=3)
    dcfg = DecodeConfig(mode="hard", max_iterations=6, length_cap=20)
    rng = substream(3, "acceptance", "hard")
    checkpoints = [init_params(cfg)]
    wild = init_params(cfg)
    for name in wild:
        wild[name] = rng.normal(0.0, 1.0, size=wild[name].shape)
    checkpoints.append(wild)
    zero = init_params(cfg)
    for name in zero:
        zero[name] = np.zeros_like(zero[name])
    checkpoints.append(zero)

    hyps = []
    sets = []
    decoded = 0
    while decoded < 1002:
        params = checkpoints[decoded % len(checkpoints)]
        n_src = int(rng.integers(1, 12))
        source = tuple(int(t) for t in rng.integers(N_RESERVED, 30, size=n_src))
        n_terms = int(rng.integers(1, 4))
        spans = tuple(
            tuple(int(t) for t in rng.integers(N_RESERVED, 30,
                                               size=int(rng.integers(1, 3))))
            for _ in range(n_terms)
        )
        state = run_decode(source, spans, None, params, cfg, dcfg)
        hyps.append(state.output)
        sets.append(spans)
        decoded += 1
    usage = term_usage_rate(hyps, sets)
    elapsed = time.time() - started
    report(
        3,
        usage == 100.0 and decoded >= 1000 and elapsed < 60.0,
        f"{decoded} hard decodes, Term%={usage}, {elapsed:.1f}s",
    )


# --------------------------------------------------------------- criterion 4


def _fd_check(cfg: ModelConfig, rng) -> float:
    """Worst scaled gradient error over every parameter entry."""
    n = int(rng.integers(2, 5))
    target = tuple(int(t) for t in rng.integers(N_RESERVED, cfg.vocab_size, size=n))
    source = tuple(int(t) for t in rng.integers(N_RESERVED, cfg.vocab_size,
                                                size=int(rng.integers(1, 4))))
    corpus = ParallelCorpus((source,), (target,))
    table = tfidf_scores(corpus)
    pipe = PipelineConfig(deletion_prob=0.5, noise_rate=0.4,
                          k_max=cfg.k_max, max_terms=2, max_len=cfg.max_len)
    example = build_training_example(
        corpus.pair(0), table.scores[0], substream(int(rng.integers(1 << 30)),),
        pipe, vocab_size=cfg.vocab_size,
    )
    params = init_params(cfg)
    _, grads = gradients(example, params, cfg)
    h = 1e-5
    worst = 0.0
    for name, tensor in params.items():
        flat = tensor.reshape(-1)
        analytic = grads[name].reshape(-1)
        for k in range(flat.size):
            keep = flat[k]
            flat[k] = keep + h
            up = loss(example, params, cfg)
            flat[k] = keep - h
            down = loss(example, params, cfg)
            flat[k] = keep
            fd = (up - down) / (2 * h)
            err = abs(analytic[k] - fd) / max(1.0, abs(analytic[k]), abs(fd))
            worst = max(worst, err)
    return worst


def test_criterion_4_gradient_correctness():
    started = time.time()
    worst = 0.0
    configs = 0
    rng = substream(17, "acceptance", "fd")
    for trial in range(5):
        cfg = ModelConfig(
            vocab_size=int(rng.integers(8, 14)),
            d_model=4,
            n_layers=int(rng.integers(1, 3)),
            k_max=int(rng.integers(3, 6)),
            max_len=12,
            n_constraint_labels=3,
            seed=int(rng.integers(1000)),
        )
        worst = max(worst, _fd_check(cfg, rng))
        configs += 1
    elapsed = time.time() - started
    report(
        4,
        worst < 1e-4 and configs >= 5 and elapsed < 120.0,
        f"{configs} configs, worst scaled error {worst:.2e}, {elapsed:.1f}s",
    )


# --------------------------------------------------------------- criterion 5

HYPER = dict(
    d_model=32,
    n_layers=2,
    k_max=8,
    max_len=16,
    steps=6000,
    batch_size=12,
    warmup_steps=300,
    learning_rate=5e-3,
    seed=7,
    max_terms=3,
    noise_rate=0.3,
    deletion_prob=0.6,
    min_count=1,
    max_iterations=10,
    length_cap=16,
)


def test_criterion_5_synthetic_end_to_end():
    started = time.time()
    task = lexicon_task(seed=7, n_train=2000, n_test=150, n_constrained=150,
                        rare_occurrences=1)
    refs = [tuple(r.split()) for r in task.test_tgt]
    word_sets = [(tuple(t.split()),) for t in task.constraint_terms]
    csets = [[t] for t in task.constraint_terms]

    accuracy = {}
    soft = {}
    for variant in ("baseline", "ct", "act"):
        est = ConstrainedEditTranslator(variant=variant, **HYPER)
        est.fit(task.train_src, task.train_tgt)
        plain = est.predict(task.test_src, mode="none")
        accuracy[variant] = token_accuracy(
            [tuple(h.split()) for h in plain], refs
        )
        constrained = est.predict(task.constrained_src, constraints=csets,
                                  mode="soft")
        soft[variant] = term_usage_rate(
            [tuple(h.split()) for h in constrained], word_sets
        )
    elapsed = time.time() - started
    ok = (
        accuracy["ct"] >= 95.0
        and soft["act"] >= soft["ct"] >= soft["baseline"]
        and soft["act"] - soft["baseline"] >= 3.0
        and elapsed < 900.0
    )
    report(
        5,
        ok,
        f"acc(ct)={accuracy['ct']:.2f}, soft Term% act/ct/baseline="
        f"{soft['act']:.2f}/{soft['ct']:.2f}/{soft['baseline']:.2f}, "
        f"{elapsed:.0f}s",
    )


# --------------------------------------------------------------- criterion 6


def test_criterion_6_self_constraint_integrity():
    started = time.time()
    task = lexicon_task(seed=7, n_train=800, n_test=120, n_constrained=10)
    freq = word_frequencies(task.train_tgt)
    survivors = 0
    samples = 0
    for i, line in enumerate(task.test_tgt):
        words = tuple(line.split())
        picks = build_self_constraints(words, freq, seed=7, index=i)
        if picks is None:
            assert len(words) < 6
            continue
        survivors += 1
        assert len(picks) == 6
        assert all(p is not None and p in words for p in picks)
        samples += sum(1 for p in picks if p is not None)

    # bucket mean frequencies must not increase from bucket 1 to 6
    monotone = True
    for line in task.test_tgt:
        words = tuple(line.split())
        buckets = bucket_words(words, freq)
        if buckets is None:
            continue
        means = [
            sum(freq[w.lower()] for w in b) / len(b) for b in buckets
        ]
        if any(means[k] < means[k + 1] for k in range(5)):
            monotone = False

    # exclude_unk: a word outside `known` never becomes a constraint
    known = {w for line in task.train_tgt for w in line.split()}
    known.discard("t00")
    clean = True
    for i, line in enumerate(task.test_tgt):
        words = tuple(line.split())
        picks = build_self_constraints(words, freq, exclude_unk=True,
                                       known=known, seed=7, index=i)
        if picks is None:
            continue
        if any(p == "t00" for p in picks):
            clean = False
    elapsed = time.time() - started
    report(
        6,
        survivors > 0 and samples == 6 * survivors and monotone and clean
        and elapsed < 30.0,
        f"{survivors} surviving refs, {samples} samples, monotone={monotone}, "
        f"exclude_unk clean={clean}, {elapsed:.1f}s",
    )


# --------------------------------------------------------------- criterion 7


def test_criterion_7_metric_ground_truth():
    refs = [tuple("the cat sat on the mat".split()),
            tuple("a stitch in time saves nine".split())]
    identity = corpus_bleu(refs, refs)

    # hypothesis shorter than the reference: BP = exp(1 - 5/4) on a
    # perfectly matching 4-gram prefix
    bp_case = corpus_bleu([("a", "b", "c", "d")], [("a", "b", "c", "d", "e")])
    expected_bp = 100.0 * np.exp(1.0 - 5.0 / 4.0)

    # two constraints, one used contiguously: exactly half
    usage = term_usage_rate(
        [("x", "y", "z"), ("p", "q")],
        [(("x", "y"),), (("q", "p"),)],
    )
    ok = (
        identity == 100.0
        and abs(bp_case - expected_bp) <= 0.01
        and usage == 50.0
    )
    report(
        7,
        ok,
        f"identity={identity}, bp={bp_case:.4f} vs {expected_bp:.4f}, "
        f"half-usage={usage}",
    )


# --------------------------------------------------------------- criterion 8


def _pipeline(tmp_path, tag: str) -> dict:
    task = lexicon_task(seed=7, n_train=300, n_test=30, n_constrained=30)
    root = tmp_path / tag
    root.mkdir()
    (root / "train.src").write_text("".join(l + "\n" for l in task.train_src))
    (root / "train.tgt").write_text("".join(l + "\n" for l in task.train_tgt))
    (root / "test.src").write_text("".join(l + "\n" for l in task.constrained_src))
    (root / "test.tgt").write_text("".join(l + "\n" for l in task.constrained_tgt))
    tsv = "".join(f"{i}\t{t}\n" for i, t in enumerate(task.constraint_terms))
    (root / "terms.tsv").write_text(tsv)
    out = root / "run"
    cfg = root / "run.cfg"
    cfg.write_text(
        f"train_src={root}/train.src\n"
        f"train_tgt={root}/train.tgt\n"
        f"test_src={root}/test.src\n"
        f"ref={root}/test.tgt\n"
        f"out={out}\n"
        "d_model=16\nn_layers=1\nk_max=6\nmax_len=16\n"
        "steps=150\nbatch_size=8\nwarmup_steps=30\nlearning_rate=4e-3\n"
        "seed=7\nvariant=act\nmode=soft\nmax_iterations=6\nlength_cap=16\n"
        "em_iterations=3\n"
    )
    argv = ["--config", str(cfg)]
    assert main(["datagen"] + argv) == 0
    assert main(["train"] + argv) == 0
    assert main(["translate"] + argv + ["--constraints", str(root / "terms.tsv")]) == 0
    assert main(["evaluate"] + argv + ["--constraints", str(root / "terms.tsv")]) == 0
    return {
        "dataset": (out / "dataset.jsonl").read_bytes(),
        "checkpoint": (out / "checkpoint_act.bin").read_bytes(),
        "hypotheses": (out / "hyp.txt").read_bytes(),
        "report": (out / "report.json").read_bytes(),
    }


def test_criterion_8_pipeline_determinism(tmp_path):
    started = time.time()
    first = _pipeline(tmp_path, "one")
    second = _pipeline(tmp_path, "two")
    same = {name: first[name] == second[name] for name in first}
    elapsed = time.time() - started
    report(
        8,
        all(same.values()),
        f"byte-identical={same}, {elapsed:.0f}s",
    )
