"""Text normalisation, tokenisation, vocabulary and fixed-length encoding.

Normalisation steps, in order:

1. Unicode lowercase, then NFC composition (Vietnamese text arrives in both
   composed and decomposed forms);
2. every character in a Unicode punctuation category (``P*``) becomes a space;
3. every maximal run of decimal digits (category ``Nd``) becomes the token
   ``number``;
4. whitespace runs collapse to one space and the ends are trimmed.

Tokenisation splits on spaces and, when a lexicon is given, greedily joins
the longest run of syllables that forms a lexicon word, using ``_``.
"""
from __future__ import annotations

import csv
import functools
import io
import os
import re
import sys
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

MAX_LEN = 220
PAD, UNK = "<pad>", "<unk>"
PAD_ID, UNK_ID = 0, 1
NUMBER_TOKEN = "number"
LABEL_NAMES = ("clean", "offensive", "hate")

_DIGITS = re.compile(r"\d+")  # str-pattern \d matches exactly Unicode Nd
_SPACES = re.compile(r"\s+")


@functools.lru_cache(maxsize=None)
def _punctuation_table() -> dict[int, str]:
    return {i: " " for i in range(sys.maxunicode + 1)
            if unicodedata.category(chr(i)).startswith("P")}


def normalize_text(raw: str) -> str:
    text = unicodedata.normalize("NFC", raw.lower())
    text = text.translate(_punctuation_table())
    text = _DIGITS.sub(f" {NUMBER_TOKEN} ", text)
    return _SPACES.sub(" ", text).strip()


class Lexicon:
    """Multi-syllable words for greedy longest-match joining."""

    def __init__(self, words: Iterable[str] = ()):
        self.entries: set[tuple[str, ...]] = set()
        self.max_syllables = 1
        for w in words:
            self.add(w)

    def add(self, word: str) -> None:
        syllables = tuple(normalize_text(word.replace("_", " ")).split())
        if len(syllables) < 2:
            return
        self.entries.add(syllables)
        self.max_syllables = max(self.max_syllables, len(syllables))

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, syllables) -> bool:
        return tuple(syllables) in self.entries

    def words(self) -> list[str]:
        return sorted(" ".join(e) for e in self.entries)

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "Lexicon":
        """One word per line, syllables separated by spaces (or underscores)."""
        with open(path, encoding="utf-8") as fh:
            return cls(line.strip() for line in fh if line.strip())


def tokenize(normalized: str, lexicon: Lexicon | None = None) -> list[str]:
    syllables = normalized.split()
    if not lexicon or not syllables:
        return syllables
    tokens = []
    i = 0
    while i < len(syllables):
        for span in range(min(lexicon.max_syllables, len(syllables) - i), 1, -1):
            if tuple(syllables[i:i + span]) in lexicon.entries:
                tokens.append("_".join(syllables[i:i + span]))
                i += span
                break
        else:
            tokens.append(syllables[i])
            i += 1
    return tokens


def preprocess(texts: Iterable[str], lexicon: Lexicon | None = None) -> list[list[str]]:
    return [tokenize(normalize_text(t), lexicon) for t in texts]


class Vocabulary:
    """Token/index map with PAD at 0 and UNK at 1."""

    def __init__(self, tokens: Sequence[str] = (), min_frequency: int = 1):
        self.min_frequency = min_frequency
        self.itos: list[str] = [PAD, UNK]
        self.stoi: dict[str, int] = {PAD: PAD_ID, UNK: UNK_ID}
        for tok in tokens:
            if tok in self.stoi:
                raise ValueError(f"duplicate vocabulary token {tok!r}")
            self.stoi[tok] = len(self.itos)
            self.itos.append(tok)

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.itos == other.itos

    def index(self, token: str) -> int:
        return self.stoi.get(token, UNK_ID)

    def token(self, index: int) -> str:
        return self.itos[index]

    def save(self, path: str | os.PathLike) -> None:
        """One token per line; line number is the index."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for tok in self.itos:
                fh.write(tok + "\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if lines[:2] != [PAD, UNK]:
            raise DataError(f"{path}: vocabulary must start with {PAD} and {UNK}")
        return cls(lines[2:])


def build_vocab(corpus: Iterable[Sequence[str]], min_frequency: int = 1) -> Vocabulary:
    """Keep tokens seen at least ``min_frequency`` times.

    Indices from 2 follow descending frequency, ties broken alphabetically.
    """
    if min_frequency < 1:
        raise ValueError(f"min_frequency must be >= 1, got {min_frequency}")
    counts = Counter(tok for doc in corpus for tok in doc)
    counts.pop(PAD, None)
    counts.pop(UNK, None)
    kept = sorted((t for t, n in counts.items() if n >= min_frequency),
                  key=lambda t: (-counts[t], t))
    return Vocabulary(kept, min_frequency=min_frequency)


def encode_pad(tokens: Sequence[str], vocab: Vocabulary, max_len: int = MAX_LEN) -> np.ndarray:
    """Map tokens to ids, keep the first ``max_len``, post-pad with PAD."""
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    row = np.full(max_len, PAD_ID, dtype=np.int64)
    ids = [vocab.index(t) for t in tokens[:max_len]]
    row[:len(ids)] = ids
    return row


def decode(row: Sequence[int], vocab: Vocabulary) -> list[str]:
    return [vocab.token(int(i)) for i in row if int(i) != PAD_ID]


@dataclass
class EncodedBatch:
    ids: np.ndarray
    labels: np.ndarray | None = None
    lengths: np.ndarray = field(default=None)

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        if self.ids.ndim != 2:
            raise DataError(f"ids must be a [batch, max_len] matrix, got shape {self.ids.shape}")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (len(self.ids),):
                raise DataError(f"{len(self.labels)} labels for {len(self.ids)} rows")
        if self.lengths is None:
            self.lengths = (self.ids != PAD_ID).sum(axis=1)

    def __len__(self) -> int:
        return len(self.ids)

    def subset(self, index) -> "EncodedBatch":
        return EncodedBatch(self.ids[index], None if self.labels is None else self.labels[index],
                            self.lengths[index])


def encode_corpus(token_lists: Sequence[Sequence[str]], vocab: Vocabulary, labels=None,
                  max_len: int = MAX_LEN) -> EncodedBatch:
    ids = np.zeros((len(token_lists), max_len), dtype=np.int64)
    for r, toks in enumerate(token_lists):
        ids[r] = encode_pad(toks, vocab, max_len)
    lengths = np.array([len(t) for t in token_lists], dtype=np.int64)
    return EncodedBatch(ids, labels, lengths)


def read_dataset(path: str | os.PathLike, require_labels: bool = True):
    """Read a ``text,label`` CSV; returns ``(texts, labels or None)``."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            content = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc.strerror or exc}") from exc
    except UnicodeDecodeError as exc:
        raise DataError(f"dataset {path} is not valid UTF-8: {exc}") from exc
    return parse_dataset(content, require_labels=require_labels, source=str(path))


def parse_dataset(content: str, require_labels: bool = True, source: str = "<input>"):
    reader = csv.DictReader(io.StringIO(content))
    fields = reader.fieldnames or []
    if "text" not in fields:
        raise DataError(f"{source}: header must contain a 'text' column, got {fields}")
    has_labels = "label" in fields
    if require_labels and not has_labels:
        raise DataError(f"{source}: header must contain a 'label' column")
    texts, labels = [], []
    for lineno, row in enumerate(reader, start=2):
        texts.append(row["text"] or "")
        if has_labels:
            raw = (row["label"] or "").strip()
            if raw not in ("0", "1", "2"):
                raise DataError(f"{source}: row {lineno}: label {raw!r} not in {{0,1,2}}")
            labels.append(int(raw))
    return texts, (np.array(labels, dtype=np.int64) if has_labels else None)
