"""Vocabulary, tokenisation, and corpus containers.

File conventions used throughout:

* corpus file: UTF-8 text, one sentence per line, tokens split on whitespace
* vocabulary file: one symbol per line, the line number is the symbol id
* constraint file: TSV with columns (sentence_index, target_term) and an
  optional third column holding the corresponding source term
* alignment file: one line per sentence pair of space-separated
  ``srcIndex-tgtIndex`` links
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .validation import DataError

PAD_ID = 0
BOS_ID = 1
EOS_ID = 2
PLH_ID = 3
UNK_ID = 4

PAD = "<pad>"
BOS = "<s>"
EOS = "</s>"
PLH = "[PLH]"
UNK = "<UNK>"

RESERVED = (PAD, BOS, EOS, PLH, UNK)
N_RESERVED = len(RESERVED)

Sentence = tuple  # tuple[int, ...]
ConstraintSet = tuple  # tuple[Sentence, ...]
ProtectionMask = tuple  # tuple[bool, ...]


class Vocabulary:
    """Bijective symbol/id table with the reserved symbols pinned to ids 0-4.

    Unknown symbols map to UNK on lookup; ids out of range are an error.
    """

    __slots__ = ("symbols", "_index")

    def __init__(self, symbols: Iterable[str] = ()):
        table = list(RESERVED)
        seen = set(RESERVED)
        for sym in symbols:
            if sym in seen:
                raise DataError(f"duplicate vocabulary symbol {sym!r}")
            if not sym or any(c.isspace() for c in sym):
                raise DataError(f"vocabulary symbol {sym!r} is empty or has whitespace")
            table.append(sym)
            seen.add(sym)
        self.symbols: tuple = tuple(table)
        self._index = {s: i for i, s in enumerate(table)}

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.symbols == other.symbols

    def id(self, symbol: str) -> int:
        return self._index.get(symbol, UNK_ID)

    def symbol(self, idx: int) -> str:
        return self.symbols[idx]

    def encode(self, line: str) -> Sentence:
        return tuple(self._index.get(tok, UNK_ID) for tok in line.split())

    def decode(self, sentence: Sequence[int]) -> str:
        return " ".join(self.symbols[i] for i in sentence)

    def save(self, path) -> None:
        Path(path).write_text(
            "".join(s + "\n" for s in self.symbols), encoding="utf-8"
        )

    @classmethod
    def load(cls, path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if tuple(lines[:N_RESERVED]) != RESERVED:
            raise DataError(
                f"{path}: vocabulary file must start with the reserved symbols "
                f"{RESERVED}"
            )
        return cls(lines[N_RESERVED:])


def build_vocabulary(lines: Iterable[str], min_count: int = 1) -> Vocabulary:
    """Vocabulary of all tokens seen at least min_count times.

    Symbols are ordered by descending frequency, ties broken lexicographically,
    so the table is a pure function of the input text.
    """
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    counts: Counter = Counter()
    for line in lines:
        counts.update(line.split())
    kept = [
        (sym, c)
        for sym, c in counts.items()
        if c >= min_count and sym not in RESERVED
    ]
    kept.sort(key=lambda item: (-item[1], item[0]))
    return Vocabulary(sym for sym, _ in kept)


def tokenize(line: str, vocab: Vocabulary) -> Sentence:
    """Whitespace tokenisation; out-of-vocabulary tokens become UNK."""
    return vocab.encode(line)


def detokenize(sentence: Sequence[int], vocab: Vocabulary) -> str:
    return vocab.decode(sentence)


@dataclass(frozen=True)
class ParallelCorpus:
    """Aligned source/target id sequences plus optional per-pair constraints."""

    sources: tuple
    targets: tuple
    constraints: tuple | None = None

    def __post_init__(self):
        if len(self.sources) != len(self.targets):
            raise DataError(
                f"corpus sides differ: {len(self.sources)} source vs "
                f"{len(self.targets)} target sentences"
            )
        if self.constraints is not None and len(self.constraints) != len(self.sources):
            raise DataError(
                f"constraint list has {len(self.constraints)} entries for "
                f"{len(self.sources)} sentence pairs"
            )

    def __len__(self) -> int:
        return len(self.sources)

    def pair(self, i: int) -> tuple:
        return self.sources[i], self.targets[i]

    def pairs(self) -> Iterator[tuple]:
        return iter(zip(self.sources, self.targets))

    @classmethod
    def from_files(cls, src_path, tgt_path, vocab: Vocabulary) -> "ParallelCorpus":
        src_lines = read_lines(src_path)
        tgt_lines = read_lines(tgt_path)
        if len(src_lines) != len(tgt_lines):
            raise DataError(
                f"{src_path} has {len(src_lines)} lines but {tgt_path} has "
                f"{len(tgt_lines)}"
            )
        return cls(
            tuple(vocab.encode(l) for l in src_lines),
            tuple(vocab.encode(l) for l in tgt_lines),
        )


def read_lines(path) -> list:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing input file: {path}")
    text = path.read_text(encoding="utf-8")
    return text.split("\n")[:-1] if text.endswith("\n") else text.split("\n") if text else []


def write_lines(path, lines: Iterable[str]) -> None:
    Path(path).write_text("".join(l + "\n" for l in lines), encoding="utf-8")


def read_constraint_tsv(path, vocab: Vocabulary, n_sentences: int) -> list:
    """Per-sentence constraint lists.

    Returns one list per sentence of (target_ids, source_ids_or_None) in file
    order.  Terms are space-separated token strings inside the TSV fields.
    """
    entries: list = [[] for _ in range(n_sentences)]
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
        term = vocab.encode(cols[1])
        if not term:
            raise DataError(f"{path}:{lineno}: empty target term")
        src_term = vocab.encode(cols[2]) if len(cols) == 3 and cols[2].strip() else None
        entries[idx].append((term, src_term))
    return entries


def write_constraint_tsv(path, entries: Sequence, vocab: Vocabulary) -> None:
    """Inverse of read_constraint_tsv; source terms may be None."""
    rows = []
    for idx, constraint_list in enumerate(entries):
        for term, src_term in constraint_list:
            cols = [str(idx), vocab.decode(term)]
            if src_term is not None:
                cols.append(vocab.decode(src_term))
            rows.append("\t".join(cols))
    write_lines(path, rows)


def read_pharaoh(path) -> list:
    """Alignment links per sentence pair, e.g. line "0-0 1-2" -> {(0,0),(1,2)}."""
    links = []
    for lineno, raw in enumerate(read_lines(path), start=1):
        pair_links = set()
        for item in raw.split():
            try:
                s, t = item.split("-")
                pair_links.add((int(s), int(t)))
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad alignment link {item!r}") from None
        links.append(frozenset(pair_links))
    return links


def write_pharaoh(path, links: Sequence) -> None:
    rows = [
        " ".join(f"{s}-{t}" for s, t in sorted(pair_links))
        for pair_links in links
    ]
    write_lines(path, rows)
