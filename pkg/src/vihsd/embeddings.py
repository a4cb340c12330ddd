"""Reading fastText ``.vec`` files and aligning them to a vocabulary.

Format rules:

* line 1 is ``<count> <dim>`` (two base-10 integers);
* each further non-blank line is ``<token> <v1> ... <vdim>`` separated by
  single ASCII spaces; a trailing space and ``\\r\\n`` endings are tolerated;
* the token is everything before the first space, so it may hold any other
  characters;
* a row with a component count other than ``dim`` is a format error;
* a declared count that disagrees with the rows found is only a warning;
* a repeated token keeps its last vector, with a warning.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Container

import numpy as np

from .errors import ConfigError, FormatError
from .rng import RngState, as_rng
from .text import PAD_ID, Vocabulary

logger = logging.getLogger(__name__)

OOV_INIT_RANGE = 0.05


@dataclass
class VecFile:
    vocab_count: int
    dim: int
    entries: dict[str, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, token: str) -> bool:
        return token in self.entries

    def __getitem__(self, token: str) -> np.ndarray:
        return self.entries[token]


def parse_vec_file(path: str | os.PathLike, keep: Container[str] | None = None) -> VecFile:
    """Stream-parse a ``.vec`` file.

    ``keep`` optionally restricts which tokens are stored; every row is still
    validated.  Large published files hold millions of rows, so passing the
    vocabulary here keeps memory proportional to it.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2 or not all(p.isdigit() for p in parts):
            raise FormatError(f"header must be '<count> <dim>', got {header.strip()!r}", line=1)
        count, dim = int(parts[0]), int(parts[1])
        if dim < 1:
            raise FormatError(f"dimension must be positive, got {dim}", line=1)
        vec = VecFile(count, dim)
        rows = 0
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\r\n").rstrip(" ")
            if not line:
                continue
            token, _, rest = line.partition(" ")
            values = rest.split(" ") if rest else []
            if len(values) != dim:
                raise FormatError(f"token {token!r} has {len(values)} components, expected {dim}",
                                  line=lineno)
            try:
                arr = np.array([float(v) for v in values], dtype=np.float32)
            except ValueError as exc:
                raise FormatError(f"non-numeric component for token {token!r}: {exc}",
                                  line=lineno) from None
            rows += 1
            if keep is not None and token not in keep:
                continue
            if token in vec.entries:
                logger.warning("%s line %d: duplicate token %r, keeping the later vector",
                               path, lineno, token)
            vec.entries[token] = arr
    if rows != count:
        logger.warning("%s: header declares %d vectors but %d rows were found", path, count, rows)
    return vec


def write_vec_file(vec: VecFile, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(vec.entries)} {vec.dim}\n")
        for token, arr in vec.entries.items():
            fh.write(token + " " + " ".join(repr(float(v)) for v in arr) + "\n")


@dataclass
class EmbeddingTable:
    weights: np.ndarray
    trainable: bool = True
    coverage: float = 0.0
    pad_index: int = PAD_ID

    @property
    def vocab_size(self) -> int:
        return self.weights.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.weights.shape[1]


def random_embedding_table(vocab_size: int, embed_dim: int, rng: RngState | int | None = None,
                           trainable: bool = True) -> EmbeddingTable:
    rng = as_rng(rng)
    weights = rng.uniform(-OOV_INIT_RANGE, OOV_INIT_RANGE,
                          size=(vocab_size, embed_dim)).astype(np.float32)
    weights[PAD_ID] = 0.0
    return EmbeddingTable(weights, trainable, 0.0)


def build_embedding_matrix(vec: VecFile, vocab: Vocabulary, rng: RngState | int | None = None,
                           embed_dim: int | None = None, trainable: bool = True) -> EmbeddingTable:
    """One row per vocabulary index.

    PAD is zero, tokens present in ``vec`` copy their vector, everything else
    (UNK included) is uniform in ``±0.05``.  ``coverage`` is the share of
    non-reserved tokens found in the file.
    """
    dim = vec.dim if embed_dim is None else embed_dim
    if vec.dim != dim:
        raise ConfigError(f"vector file has dimension {vec.dim} but the model expects {dim}")
    table = random_embedding_table(len(vocab), dim, rng, trainable)
    found = 0
    for idx, token in enumerate(vocab.itos):
        if idx < 2:
            continue
        arr = vec.entries.get(token)
        if arr is not None:
            table.weights[idx] = arr
            found += 1
    real = len(vocab) - 2
    table.coverage = found / real if real else 0.0
    return table
