"""Command-line driver for reproducible runs.

Every stage reads a flat key=value config file (flags win over file values),
derives all randomness from one seed, and finishes by writing a manifest
with checksums of everything it read and wrote.  Exit codes: 0 success,
1 usage error, 2 data error, 3 numeric divergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .align import IbmModel1Aligner, alignment_labels
from .corpus import (
    ParallelCorpus,
    Vocabulary,
    build_vocabulary,
    read_constraint_tsv,
    read_lines,
    write_lines,
    write_pharaoh,
)
from .datagen import (
    VARIANTS,
    PipelineConfig,
    build_training_example,
    example_to_json,
    unigram_noise_weights,
)
from .decode import MODES, DecodeConfig, run_decode
from .metrics import (
    EvalReport,
    N_BUCKETS,
    build_self_constraints,
    corpus_bleu,
    sample_n_constraints,
    term_usage_rate,
    tertile_split,
    word_frequencies,
)
from .network import ModelConfig
from .seeding import substream
from .tfidf import TfidfScorer, tfidf_scores
from .trainer import (
    load_checkpoint,
    save_checkpoint,
    token_head_accuracy,
    train,
)
from .validation import DataError, DivergenceError


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); usage errors are 1
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    """Resolved settings for one stage; field names double as config keys."""

    # data paths
    train_src: str | None = None
    train_tgt: str | None = None
    test_src: str | None = None
    test_tgt: str | None = None
    constraints: str | None = None
    ttable: str | None = None
    vocab: str | None = None
    checkpoint: str | None = None
    resume: str | None = None
    hyp: str | None = None
    ref: str | None = None
    # model
    d_model: int = 32
    n_layers: int = 2
    k_max: int = 8
    max_len: int = 64
    learning_rate: float = 3e-3
    steps: int = 2000
    batch_size: int = 16
    warmup_steps: int = 400
    # data generation
    deletion_prob: float = 0.5
    noise_rate: float = 0.15
    max_terms: int = 3
    min_count: int = 1
    em_iterations: int = 5
    align_threshold: float = 0.1
    freeze_examples: bool = False
    # decoding
    mode: str = "soft"
    max_iterations: int = 10
    length_cap: int = 200
    # run identity
    seed: int = 0
    out: str = "run"
    variant: str = "baseline"
    # analysis
    order: str = "frequency"
    exclude_unk: bool = False
    n_constraints: int = 3


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(key: str, raw: str):
    kind = _FIELDS[key].type
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.strip().lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return raw
    except ValueError as err:
        raise DataError(f"config field {key}: {err}") from None


def read_config_file(path) -> dict:
    """Flat key=value lines; blank lines and # comments are skipped."""
    values = {}
    for lineno, raw in enumerate(read_lines(path), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            raise DataError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _convert(key, value.strip())
    return values


def resolve_config(args) -> RunConfig:
    """File values first, then explicit command-line flags on top."""
    values = read_config_file(args.config) if args.config else {}
    for key in _FIELDS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    cfg = RunConfig(**values)
    if cfg.variant not in VARIANTS:
        raise UsageError(f"variant must be one of {VARIANTS}, got {cfg.variant!r}")
    if cfg.mode not in MODES:
        raise UsageError(f"mode must be one of {MODES}, got {cfg.mode!r}")
    return cfg


# ---------------------------------------------------------------- manifests


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(cfg: RunConfig, command: str, inputs, outputs, timings, metrics=None):
    """Checksummed record of one stage, written atomically."""
    payload = {
        "command": command,
        "version": __version__,
        "config": dataclasses.asdict(cfg),
        "inputs": {str(p): _sha256(p) for p in sorted(set(map(str, inputs)))},
        "outputs": {str(p): _sha256(p) for p in sorted(set(map(str, outputs)))},
        "wall_clock_seconds": timings,
        "metrics": metrics or {},
    }
    path = Path(cfg.out) / f"manifest_{command}.json"
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    os.replace(tmp, path)
    return path


# ------------------------------------------------------------- shared setup


def _require(cfg: RunConfig, *keys) -> None:
    missing = [k for k in keys if getattr(cfg, k) is None]
    if missing:
        raise UsageError(f"missing required config keys: {', '.join(missing)}")


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_train_corpus(cfg: RunConfig):
    _require(cfg, "train_src", "train_tgt")
    vocab = build_vocabulary(
        read_lines(cfg.train_src) + read_lines(cfg.train_tgt), min_count=cfg.min_count
    )
    corpus = ParallelCorpus.from_files(cfg.train_src, cfg.train_tgt, vocab)
    return vocab, corpus


def _model_config(cfg: RunConfig, vocab_size: int) -> ModelConfig:
    return ModelConfig(
        vocab_size=vocab_size,
        d_model=cfg.d_model,
        n_layers=cfg.n_layers,
        k_max=cfg.k_max,
        max_len=cfg.max_len,
        n_constraint_labels=cfg.max_terms + 1,
        learning_rate=cfg.learning_rate,
        steps=cfg.steps,
        batch_size=cfg.batch_size,
        warmup_steps=cfg.warmup_steps,
        seed=cfg.seed,
    )


def _pipe_config(cfg: RunConfig) -> PipelineConfig:
    return PipelineConfig(
        deletion_prob=cfg.deletion_prob,
        noise_rate=cfg.noise_rate,
        k_max=cfg.k_max,
        max_terms=cfg.max_terms,
        max_len=cfg.max_len,
    )


def _variant_aligner(cfg: RunConfig, vocab: Vocabulary, corpus: ParallelCorpus):
    if cfg.variant != "act":
        return None
    if cfg.ttable:
        return IbmModel1Aligner.load_table(
            cfg.ttable, vocab, threshold=cfg.align_threshold
        )
    aligner = IbmModel1Aligner(
        em_iterations=cfg.em_iterations, threshold=cfg.align_threshold
    )
    return aligner.fit(corpus.sources, corpus.targets)


# ------------------------------------------------------------------- stages


def cmd_datagen(args) -> None:
    cfg = resolve_config(args)
    started = time.time()
    out = _out_dir(cfg)
    vocab, corpus = _load_train_corpus(cfg)
    table = tfidf_scores(corpus)
    aligner = _variant_aligner(cfg, vocab, corpus)
    with_terms = cfg.variant != "baseline"
    with_alignment = cfg.variant == "act"
    pipe = _pipe_config(cfg)
    weights = unigram_noise_weights(corpus.targets, len(vocab))
    lines = []
    for i in range(len(corpus)):
        try:
            example = build_training_example(
                corpus.pair(i),
                table.scores[i],
                substream(cfg.seed, "datagen", 0, i),
                pipe,
                vocab_size=len(vocab),
                aligner=aligner,
                pair_index=i,
                with_terms=with_terms,
                with_alignment=with_alignment,
                noise_weights=weights,
            )
        except DataError as err:
            raise DataError(f"pair {i}: {err}") from None
        lines.append(example_to_json(example))
    vocab_path = out / "vocab.txt"
    vocab.save(vocab_path)
    dataset_path = out / "dataset.jsonl"
    write_lines(dataset_path, lines)
    outputs = [vocab_path, dataset_path]
    if aligner is not None and not cfg.ttable:
        ttable_path = out / "ttable.tsv"
        aligner.save_table(ttable_path, vocab)
        outputs.append(ttable_path)
    inputs = [cfg.train_src, cfg.train_tgt] + ([cfg.ttable] if cfg.ttable else [])
    write_manifest(
        cfg,
        "datagen",
        inputs,
        outputs,
        {"total": time.time() - started},
        {"n_examples": len(lines)},
    )


def cmd_train(args) -> None:
    cfg = resolve_config(args)
    started = time.time()
    out = _out_dir(cfg)
    vocab, corpus = _load_train_corpus(cfg)
    model_cfg = _model_config(cfg, len(vocab))
    init = None
    if cfg.resume:
        init, saved_cfg = load_checkpoint(cfg.resume)
        frozen = ("d_model", "n_layers", "k_max", "max_len", "vocab_size",
                  "n_constraint_labels")
        for name in frozen:
            if getattr(saved_cfg, name) != getattr(model_cfg, name):
                raise DataError(
                    f"resume checkpoint disagrees on {name}: "
                    f"{getattr(saved_cfg, name)} vs {getattr(model_cfg, name)}"
                )
    aligner = _variant_aligner(cfg, vocab, corpus)
    table = tfidf_scores(corpus)
    train_started = time.time()
    params, trace = train(
        corpus,
        model_cfg,
        _pipe_config(cfg),
        variant=cfg.variant,
        scores=table.scores,
        aligner=aligner,
        freeze_examples=cfg.freeze_examples,
        init=init,
    )
    train_seconds = time.time() - train_started
    vocab_path = out / "vocab.txt"
    vocab.save(vocab_path)
    ckpt_path = out / f"checkpoint_{cfg.variant}.bin"
    save_checkpoint(ckpt_path, params, model_cfg)
    loss_path = out / f"loss_{cfg.variant}.csv"
    write_lines(loss_path, ["step,loss"] + [f"{i + 1},{v!r}" for i, v in enumerate(trace)])

    weights = unigram_noise_weights(corpus.targets, len(vocab))
    probe = [
        build_training_example(
            corpus.pair(i),
            table.scores[i],
            substream(cfg.seed, "datagen", 0, i),
            _pipe_config(cfg),
            vocab_size=len(vocab),
            aligner=aligner,
            pair_index=i,
            with_terms=cfg.variant != "baseline",
            with_alignment=cfg.variant == "act",
            noise_weights=weights,
        )
        for i in range(min(200, len(corpus)))
    ]
    accuracy = token_head_accuracy(params, model_cfg, probe)
    inputs = [cfg.train_src, cfg.train_tgt]
    inputs += [p for p in (cfg.ttable, cfg.resume) if p]
    write_manifest(
        cfg,
        "train",
        inputs,
        [vocab_path, ckpt_path, loss_path],
        {"total": time.time() - started, "train": train_seconds},
        {"final_loss": trace[-1] if trace else None, "token_head_accuracy": accuracy},
    )


def _load_model(cfg: RunConfig):
    ckpt = cfg.checkpoint or str(Path(cfg.out) / f"checkpoint_{cfg.variant}.bin")
    params, model_cfg = load_checkpoint(ckpt)
    vocab_path = cfg.vocab or str(Path(cfg.out) / "vocab.txt")
    vocab = Vocabulary.load(vocab_path)
    if len(vocab) != model_cfg.vocab_size:
        raise DataError(
            f"vocabulary has {len(vocab)} entries but the checkpoint expects "
            f"{model_cfg.vocab_size}"
        )
    return params, model_cfg, vocab, ckpt, vocab_path


def _term_labels(source, entries, aligner) -> tuple | None:
    """Per-source-token constraint labels from explicit terms or the aligner."""
    if not entries:
        return None
    position_sets = []
    any_positions = False
    for tgt_span, src_span in entries:
        positions: tuple = ()
        if src_span:
            width = len(src_span)
            for at in range(len(source) - width + 1):
                if tuple(source[at : at + width]) == tuple(src_span):
                    positions = tuple(range(at, at + width))
                    break
        elif aligner is not None:
            positions = aligner.align_terms(source, [tgt_span])[0].source_span
        if positions:
            any_positions = True
        position_sets.append(positions)
    if not any_positions:
        return None
    return alignment_labels(len(source), position_sets)


def cmd_translate(args) -> None:
    cfg = resolve_config(args)
    started = time.time()
    out = _out_dir(cfg)
    _require(cfg, "test_src")
    params, model_cfg, vocab, ckpt, vocab_path = _load_model(cfg)
    src_lines = read_lines(cfg.test_src)
    sources = [vocab.encode(line) for line in src_lines]
    entries = (
        read_constraint_tsv(cfg.constraints, vocab, len(sources))
        if cfg.constraints
        else [[] for _ in sources]
    )
    aligner = (
        IbmModel1Aligner.load_table(cfg.ttable, vocab, threshold=cfg.align_threshold)
        if cfg.ttable
        else None
    )
    dcfg = DecodeConfig(
        mode=cfg.mode, max_iterations=cfg.max_iterations, length_cap=cfg.length_cap
    )
    hyp_lines = []
    stats = ["sentence,iterations,truncated,seconds"]
    for i, source in enumerate(sources):
        spans = tuple(tgt for tgt, _ in entries[i]) or None
        labels = _term_labels(source, entries[i], aligner)
        t0 = time.time()
        try:
            state = run_decode(source, spans, labels, params, model_cfg, dcfg)
        except DataError as err:
            raise DataError(f"sentence {i}: {err}") from None
        hyp_lines.append(vocab.decode(state.output))
        stats.append(
            f"{i},{state.iteration},{int(state.truncated)},{time.time() - t0:.6f}"
        )
    hyp_path = out / "hyp.txt"
    write_lines(hyp_path, hyp_lines)
    stats_path = out / "iterations.csv"
    write_lines(stats_path, stats)
    inputs = [cfg.test_src, ckpt, vocab_path]
    inputs += [p for p in (cfg.constraints, cfg.ttable) if p]
    write_manifest(
        cfg,
        "translate",
        inputs,
        [hyp_path, stats_path],
        {"total": time.time() - started},
        {"n_sentences": len(hyp_lines)},
    )


def cmd_evaluate(args) -> None:
    cfg = resolve_config(args)
    started = time.time()
    out = _out_dir(cfg)
    hyp_path = cfg.hyp or str(Path(cfg.out) / "hyp.txt")
    ref_path = cfg.ref or cfg.test_tgt
    if ref_path is None:
        raise UsageError("evaluate needs ref= (or test_tgt=) for references")
    hyp_lines = read_lines(hyp_path)
    ref_lines = read_lines(ref_path)
    if len(hyp_lines) != len(ref_lines):
        raise DataError(
            f"{hyp_path} has {len(hyp_lines)} lines but {ref_path} has "
            f"{len(ref_lines)}"
        )
    hyps = [tuple(line.split()) for line in hyp_lines]
    refs = [tuple(line.split()) for line in ref_lines]
    bleu = corpus_bleu(hyps, refs)
    usage = None
    inputs = [hyp_path, ref_path]
    if cfg.constraints:
        sets = _read_term_sets(cfg.constraints, len(hyps))
        usage = term_usage_rate(hyps, sets)
        inputs.append(cfg.constraints)
    report = EvalReport(bleu=bleu, term_usage=usage, n_sentences=len(hyps))
    json_path = out / "report.json"
    json_path.write_text(report.to_json() + "\n", encoding="utf-8")
    text_path = out / "report.txt"
    text_path.write_text(report.to_text(), encoding="utf-8")
    write_manifest(
        cfg,
        "evaluate",
        inputs,
        [json_path, text_path],
        {"total": time.time() - started},
        {"bleu": bleu, "term_usage": usage},
    )


def _read_term_sets(path, n_sentences: int) -> list:
    """Constraint TSV as word tuples, no vocabulary involved."""
    sets: list = [[] for _ in range(n_sentences)]
    for lineno, raw in enumerate(read_lines(path), start=1):
        if not raw.strip():
            continue
        cols = raw.split("\t")
        if len(cols) not in (2, 3):
            raise DataError(f"{path}:{lineno}: expected 2 or 3 TSV columns")
        try:
            idx = int(cols[0])
        except ValueError:
            raise DataError(f"{path}:{lineno}: bad sentence index {cols[0]!r}") from None
        if not 0 <= idx < n_sentences:
            raise DataError(
                f"{path}:{lineno}: sentence index {idx} out of range "
                f"(corpus has {n_sentences} sentences)"
            )
        term = tuple(cols[1].split())
        if not term:
            raise DataError(f"{path}:{lineno}: empty target term")
        sets[idx].append(term)
    return [tuple(s) for s in sets]


def cmd_align(args) -> None:
    cfg = resolve_config(args)
    started = time.time()
    out = _out_dir(cfg)
    vocab, corpus = _load_train_corpus(cfg)
    aligner = IbmModel1Aligner(
        em_iterations=cfg.em_iterations, threshold=cfg.align_threshold
    ).fit(corpus.sources, corpus.targets)
    ttable_path = out / "ttable.tsv"
    aligner.save_table(ttable_path, vocab)
    links = []
    for source, target in corpus.pairs():
        pair_links = set()
        for t, tok in enumerate(target):
            best_j, best_p = None, 0.0
            for j, e in enumerate(source):
                p = aligner.translation_prob(tok, e)
                if p > best_p:
                    best_j, best_p = j, p
            if best_j is not None and best_p >= cfg.align_threshold:
                pair_links.add((best_j, t))
        links.append(frozenset(pair_links))
    pharaoh_path = out / "alignments.pharaoh"
    write_pharaoh(pharaoh_path, links)
    vocab_path = out / "vocab.txt"
    vocab.save(vocab_path)
    write_manifest(
        cfg,
        "align",
        [cfg.train_src, cfg.train_tgt],
        [ttable_path, pharaoh_path, vocab_path],
        {"total": time.time() - started},
        {"final_log_likelihood": aligner.log_likelihood_[-1]},
    )


def _decode_batch(cfg, params, model_cfg, vocab, sources, constraint_sets, aligner):
    """Decode each sentence with its word constraints; returns token tuples."""
    dcfg = DecodeConfig(
        mode=cfg.mode, max_iterations=cfg.max_iterations, length_cap=cfg.length_cap
    )
    outputs = []
    for source, terms in zip(sources, constraint_sets):
        spans = tuple(tuple(vocab.id(w) for w in term) for term in terms) or None
        labels = None
        if spans and aligner is not None:
            aligned = aligner.align_terms(source, spans)
            labels = alignment_labels(len(source), aligned)
        state = run_decode(source, spans, labels, params, model_cfg, dcfg)
        outputs.append(tuple(vocab.decode(state.output).split()))
    return outputs


def cmd_analyze(args) -> None:
    cfg = resolve_config(args)
    started = time.time()
    out = _out_dir(cfg)
    _require(cfg, "train_tgt")
    freq = word_frequencies(read_lines(cfg.train_tgt))
    if args.analysis == "self-constraints":
        rows, inputs, metrics = _analyze_self_constraints(cfg, freq)
    elif args.analysis == "tertiles":
        rows, inputs, metrics = _analyze_tertiles(cfg, freq)
    else:
        rows, inputs, metrics = _analyze_n_constraints(cfg, freq)
    report = EvalReport(
        bleu=metrics.get("bleu", 0.0),
        term_usage=metrics.get("term_usage"),
        n_sentences=metrics["n_sentences"],
        breakdown=tuple(rows),
    )
    name = args.analysis.replace("-", "_")
    csv_path = out / f"analysis_{name}.csv"
    csv_path.write_text(report.breakdown_csv(), encoding="utf-8")
    json_path = out / f"analysis_{name}.json"
    json_path.write_text(report.to_json() + "\n", encoding="utf-8")
    write_manifest(
        cfg,
        f"analyze_{name}",
        inputs,
        [csv_path, json_path],
        {"total": time.time() - started},
        metrics,
    )


def _analyze_self_constraints(cfg: RunConfig, freq):
    """Fig. 1-style table: decode each derived bucket sample, score per bucket."""
    _require(cfg, "test_src", "test_tgt")
    params, model_cfg, vocab, ckpt, vocab_path = _load_model(cfg)
    aligner = (
        IbmModel1Aligner.load_table(cfg.ttable, vocab, threshold=cfg.align_threshold)
        if cfg.ttable
        else None
    )
    src_lines = read_lines(cfg.test_src)
    ref_lines = read_lines(cfg.test_tgt)
    if len(src_lines) != len(ref_lines):
        raise DataError(
            f"{cfg.test_src} has {len(src_lines)} lines but {cfg.test_tgt} has "
            f"{len(ref_lines)}"
        )
    scorer = None
    if cfg.order == "tfidf":
        scorer = TfidfScorer(excluded=()).fit(
            [tuple(line.split()) for line in read_lines(cfg.train_tgt)]
        )
    known = set(vocab.symbols) if cfg.exclude_unk else None
    per_bucket = [([], [], []) for _ in range(N_BUCKETS)]  # sources, refs, terms
    survivors = 0
    for i, (src_line, ref_line) in enumerate(zip(src_lines, ref_lines)):
        words = tuple(ref_line.split())
        picks = build_self_constraints(
            words,
            freq,
            order=cfg.order,
            scores=tuple(scorer.score_sentence(words)) if scorer else None,
            exclude_unk=cfg.exclude_unk,
            known=known,
            seed=cfg.seed,
            index=i,
        )
        if picks is None:
            continue
        survivors += 1
        for b, pick in enumerate(picks):
            if pick is None:
                continue
            per_bucket[b][0].append(vocab.encode(src_line))
            per_bucket[b][1].append(words)
            per_bucket[b][2].append((pick,))
    rows = []
    for b, (sources, refs, terms) in enumerate(per_bucket, start=1):
        if not sources:
            rows.append((b, 0, 0.0, None))
            continue
        hyps = _decode_batch(
            cfg, params, model_cfg, vocab, sources, [(t,) for t in terms], aligner
        )
        rows.append(
            (
                b,
                len(sources),
                corpus_bleu(hyps, refs),
                term_usage_rate(hyps, [(t,) for t in terms]),
            )
        )
    inputs = [cfg.test_src, cfg.test_tgt, cfg.train_tgt, ckpt, vocab_path]
    if cfg.ttable:
        inputs.append(cfg.ttable)
    return rows, inputs, {"n_sentences": survivors}


def _analyze_tertiles(cfg: RunConfig, freq):
    """Table-6-style split of an existing hypothesis file by constraint rarity."""
    _require(cfg, "constraints")
    hyp_path = cfg.hyp or str(Path(cfg.out) / "hyp.txt")
    ref_path = cfg.ref or cfg.test_tgt
    if ref_path is None:
        raise UsageError("tertiles analysis needs ref= (or test_tgt=) references")
    hyps = [tuple(line.split()) for line in read_lines(hyp_path)]
    refs = [tuple(line.split()) for line in read_lines(ref_path)]
    if len(hyps) != len(refs):
        raise DataError(
            f"{hyp_path} has {len(hyps)} lines but {ref_path} has {len(refs)}"
        )
    sets = _read_term_sets(cfg.constraints, len(hyps))
    keep = [i for i, s in enumerate(sets) if s]
    groups = tertile_split([sets[i] for i in keep], freq)
    rows = []
    for label, group in zip(("high", "medium", "low"), groups):
        idx = [keep[g] for g in group]
        rows.append(
            (
                label,
                len(idx),
                corpus_bleu([hyps[i] for i in idx], [refs[i] for i in idx]),
                term_usage_rate([hyps[i] for i in idx], [sets[i] for i in idx]),
            )
        )
    inputs = [hyp_path, ref_path, cfg.constraints, cfg.train_tgt]
    return rows, inputs, {"n_sentences": len(keep)}


def _analyze_n_constraints(cfg: RunConfig, freq):
    """Fig. 4-style sweep: 1..n reference words forced as constraints."""
    _require(cfg, "test_src", "test_tgt")
    params, model_cfg, vocab, ckpt, vocab_path = _load_model(cfg)
    aligner = (
        IbmModel1Aligner.load_table(cfg.ttable, vocab, threshold=cfg.align_threshold)
        if cfg.ttable
        else None
    )
    src_lines = read_lines(cfg.test_src)
    ref_lines = read_lines(cfg.test_tgt)
    if len(src_lines) != len(ref_lines):
        raise DataError(
            f"{cfg.test_src} has {len(src_lines)} lines but {cfg.test_tgt} has "
            f"{len(ref_lines)}"
        )
    rows = []
    total = 0
    for n in range(1, cfg.n_constraints + 1):
        sources = []
        refs = []
        sets = []
        for i, (src_line, ref_line) in enumerate(zip(src_lines, ref_lines)):
            words = tuple(ref_line.split())
            if len(words) < n:
                continue
            rng = substream(cfg.seed, "n_constraints", n, i)
            sources.append(vocab.encode(src_line))
            refs.append(words)
            sets.append(sample_n_constraints(words, n, rng))
        if not sources:
            rows.append((n, 0, 0.0, None))
            continue
        total += len(sources)
        hyps = _decode_batch(cfg, params, model_cfg, vocab, sources, sets, aligner)
        rows.append((n, len(sources), corpus_bleu(hyps, refs), term_usage_rate(hyps, sets)))
    inputs = [cfg.test_src, cfg.test_tgt, cfg.train_tgt, ckpt, vocab_path]
    if cfg.ttable:
        inputs.append(cfg.ttable)
    return rows, inputs, {"n_sentences": total}


# --------------------------------------------------------------- entrypoint


def build_parser() -> Parser:
    parser = Parser(prog="editmt", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--variant", choices=VARIANTS)
        p.add_argument("--mode", choices=MODES)
        p.set_defaults(func=func)
        return p

    add("datagen", cmd_datagen, "emit the imitation-learning dataset")
    train_p = add("train", cmd_train, "train a model variant")
    train_p.add_argument("--resume", help="checkpoint to continue from")
    translate_p = add("translate", cmd_translate, "decode a test set")
    translate_p.add_argument("--constraints", help="constraint TSV")
    translate_p.add_argument("--checkpoint", help="checkpoint file")
    translate_p.add_argument("--vocab", help="vocabulary file")
    translate_p.add_argument("--ttable", help="translation table TSV")
    evaluate_p = add("evaluate", cmd_evaluate, "score hypotheses")
    evaluate_p.add_argument("--hyp")
    evaluate_p.add_argument("--ref")
    evaluate_p.add_argument("--constraints", help="constraint TSV")
    analyze_p = add("analyze", cmd_analyze, "constraint-construction analyses")
    analyze_p.add_argument(
        "analysis", choices=("self-constraints", "tertiles", "n-constraints")
    )
    analyze_p.add_argument("--constraints", help="constraint TSV")
    analyze_p.add_argument("--checkpoint", help="checkpoint file")
    analyze_p.add_argument("--vocab", help="vocabulary file")
    analyze_p.add_argument("--ttable", help="translation table TSV")
    analyze_p.add_argument("--hyp")
    analyze_p.add_argument("--ref")
    add("align", cmd_align, "train the word aligner and dump its artifacts")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    try:
        args.func(args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        return 2
    except DivergenceError as err:
        print(f"divergence: {err}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
