"""Lexically constrained translation by iterative sequence editing.

The model translates by editing: it deletes tokens, inserts placeholders,
and fills them, repeating until the sequence stops changing.  Constraints
are planted into the initial sequence and, in hard mode, protected from
every later edit.  Training imitates these edits on samples whose
pseudo-constraints are never corrupted, and optionally tells the encoder
where each constraint lives on the source side.
"""

from .align import (
    AlignedConstraint,
    IbmModel1Aligner,
    PharaohAlignments,
    align_constraints,
    alignment_labels,
    locate_spans,
    train_aligner,
)
from .corpus import (
    BOS_ID,
    EOS_ID,
    PAD_ID,
    PLH_ID,
    UNK_ID,
    ParallelCorpus,
    Vocabulary,
    build_vocabulary,
)
from .datagen import (
    VARIANTS,
    PipelineConfig,
    TrainingExample,
    build_training_example,
    read_dataset,
    write_dataset,
)
from .decode import MODES, DecodeConfig, DecodeState, decode, run_decode
from .estimator import ConstrainedEditTranslator
from .metrics import (
    EvalReport,
    build_self_constraints,
    corpus_bleu,
    sample_n_constraints,
    term_usage_rate,
    tertile_split,
    token_accuracy,
    word_frequencies,
)
from .network import ModelConfig, gradients, init_params, loss
from .synthetic import LexiconTask, lexicon_task
from .tfidf import TfidfScorer, tfidf_scores
from .trainer import (
    load_checkpoint,
    save_checkpoint,
    token_head_accuracy,
    train,
)
from .validation import DataError, DivergenceError

__version__ = "0.1.0"

__all__ = [
    "AlignedConstraint",
    "BOS_ID",
    "ConstrainedEditTranslator",
    "DataError",
    "DecodeConfig",
    "DecodeState",
    "DivergenceError",
    "EOS_ID",
    "EvalReport",
    "IbmModel1Aligner",
    "LexiconTask",
    "MODES",
    "ModelConfig",
    "PAD_ID",
    "PLH_ID",
    "ParallelCorpus",
    "PharaohAlignments",
    "PipelineConfig",
    "TfidfScorer",
    "TrainingExample",
    "UNK_ID",
    "VARIANTS",
    "Vocabulary",
    "align_constraints",
    "alignment_labels",
    "build_self_constraints",
    "build_training_example",
    "build_vocabulary",
    "corpus_bleu",
    "decode",
    "init_params",
    "lexicon_task",
    "load_checkpoint",
    "locate_spans",
    "gradients",
    "loss",
    "read_dataset",
    "run_decode",
    "sample_n_constraints",
    "save_checkpoint",
    "term_usage_rate",
    "tertile_split",
    "tfidf_scores",
    "token_accuracy",
    "token_head_accuracy",
    "train",
    "train_aligner",
    "word_frequencies",
    "write_dataset",
]
