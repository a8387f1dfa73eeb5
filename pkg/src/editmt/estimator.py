"""High-level translator with a fit/predict interface.

Wraps vocabulary construction, example generation, training, and constrained
decoding behind one estimator so small experiments read like any other
sklearn workflow.  The lower-level functions stay available for callers that
need file-based artifacts.
"""

from __future__ import annotations

from typing import Sequence

from sklearn.base import BaseEstimator

from .align import alignment_labels, train_aligner
from .corpus import ParallelCorpus, build_vocabulary
from .datagen import VARIANTS, PipelineConfig
from .decode import MODES, DecodeConfig, run_decode
from .metrics import corpus_bleu
from .network import ModelConfig
from .trainer import train
from .validation import DataError, check_fitted, check_same_length


class ConstrainedEditTranslator(BaseEstimator):
    """Edit-based translator trained by imitation of an edit-distance expert.

    variant picks the training recipe: "baseline" trains without pseudo
    terms, "ct" protects sampled terms from deletion, "act" additionally
    tags each source token with the index of the constraint it aligns to.
    mode picks the default decode-time handling of constraints; predict()
    can override it per call.
    """

    def __init__(
        self,
        variant: str = "act",
        mode: str = "soft",
        d_model: int = 32,
        n_layers: int = 2,
        k_max: int = 8,
        max_len: int = 64,
        learning_rate: float = 3e-3,
        steps: int = 2000,
        batch_size: int = 16,
        warmup_steps: int = 400,
        seed: int = 0,
        min_count: int = 1,
        deletion_prob: float = 0.5,
        noise_rate: float = 0.15,
        max_terms: int = 3,
        max_iterations: int = 10,
        length_cap: int = 200,
        em_iterations: int = 5,
        freeze_examples: bool = False,
    ):
        self.variant = variant
        self.mode = mode
        self.d_model = d_model
        self.n_layers = n_layers
        self.k_max = k_max
        self.max_len = max_len
        self.learning_rate = learning_rate
        self.steps = steps
        self.batch_size = batch_size
        self.warmup_steps = warmup_steps
        self.seed = seed
        self.min_count = min_count
        self.deletion_prob = deletion_prob
        self.noise_rate = noise_rate
        self.max_terms = max_terms
        self.max_iterations = max_iterations
        self.length_cap = length_cap
        self.em_iterations = em_iterations
        self.freeze_examples = freeze_examples

    def fit(self, X: Sequence[str], y: Sequence[str], callback=None):
        """Train on parallel text lines; oversized or empty pairs are dropped."""
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        check_same_length(X, y, "source lines", "target lines")
        self.vocab_ = build_vocabulary(list(X) + list(y), min_count=self.min_count)
        sources = []
        targets = []
        dropped = 0
        for src_line, tgt_line in zip(X, y):
            src = self.vocab_.encode(src_line)
            tgt = self.vocab_.encode(tgt_line)
            if not src or not tgt or len(tgt) + 2 > self.max_len or len(src) > self.max_len:
                dropped += 1
                continue
            sources.append(src)
            targets.append(tgt)
        self.n_dropped_ = dropped
        corpus = ParallelCorpus(tuple(sources), tuple(targets))
        if len(corpus) == 0:
            raise DataError("no trainable pairs after filtering")
        self.config_ = ModelConfig(
            vocab_size=len(self.vocab_),
            d_model=self.d_model,
            n_layers=self.n_layers,
            k_max=self.k_max,
            max_len=self.max_len,
            n_constraint_labels=self.max_terms + 1,
            learning_rate=self.learning_rate,
            steps=self.steps,
            batch_size=self.batch_size,
            warmup_steps=self.warmup_steps,
            seed=self.seed,
        )
        self.pipe_ = PipelineConfig(
            deletion_prob=self.deletion_prob,
            noise_rate=self.noise_rate,
            k_max=self.k_max,
            max_terms=self.max_terms,
            max_len=self.max_len,
        )
        self.aligner_ = (
            train_aligner(corpus, em_iterations=self.em_iterations)
            if self.variant == "act"
            else None
        )
        self.params_, self.loss_trace_ = train(
            corpus,
            self.config_,
            self.pipe_,
            variant=self.variant,
            aligner=self.aligner_,
            callback=callback,
            freeze_examples=self.freeze_examples,
        )
        return self

    def _encode_constraints(self, raw) -> tuple:
        spans = []
        for term in raw:
            words = term.split() if isinstance(term, str) else list(term)
            span = tuple(self.vocab_.id(w) for w in words)
            if not span:
                raise DataError("constraints must contain at least one word")
            spans.append(span)
        return tuple(spans)

    def predict(
        self,
        X: Sequence[str],
        constraints: Sequence | None = None,
        mode: str | None = None,
    ) -> list:
        """Translate lines; constraints[i] is an iterable of term strings."""
        check_fitted(self, ["params_"])
        mode = self.mode if mode is None else mode
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        if constraints is not None:
            check_same_length(X, constraints, "input lines", "constraint sets")
        dcfg = DecodeConfig(
            mode=mode, max_iterations=self.max_iterations, length_cap=self.length_cap
        )
        outputs = []
        for i, line in enumerate(X):
            source = self.vocab_.encode(line)
            spans = None
            if constraints is not None and constraints[i]:
                spans = self._encode_constraints(constraints[i])
            labels = None
            if (
                self.variant == "act"
                and spans
                and mode != "none"
                and self.aligner_ is not None
            ):
                aligned = self.aligner_.align_terms(source, spans)
                labels = alignment_labels(len(source), aligned)
            state = run_decode(source, spans, labels, self.params_, self.config_, dcfg)
            outputs.append(self.vocab_.decode(state.output))
        return outputs

    def score(self, X: Sequence[str], y: Sequence[str]) -> float:
        """Corpus BLEU against references, scaled to 0..1."""
        hyps = [line.split() for line in self.predict(X)]
        refs = [line.split() for line in y]
        return corpus_bleu(hyps, refs) / 100.0
