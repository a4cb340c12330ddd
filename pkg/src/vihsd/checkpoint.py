"""Checkpoint directories.

A checkpoint is a directory holding:

``manifest``
    UTF-8 JSON text: format tag, the model spec, and the ordered list of
    parameters with their shapes.
``weights``
    every parameter as little-endian float32, flattened row-major and
    concatenated in manifest order.
``vocab.txt`` / ``lexicon.txt``
    optional preprocessing state needed to run the model on raw text.

The directory is written under a temporary name and renamed into place, so an
interrupted save never leaves a directory that :func:`load_checkpoint`
accepts.
"""
from __future__ import annotations

import json
import os
import shutil
import tempfile
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingTable
from .errors import ConfigError, CorruptionError
from .models import ModelSpec, TextClassifierModel, build_model
from .text import Lexicon, Vocabulary

FORMAT = "vihsd-checkpoint"
VERSION = 1
MANIFEST, WEIGHTS, VOCAB, LEXICON = "manifest", "weights", "vocab.txt", "lexicon.txt"
_DTYPE = np.dtype("<f4")


def save_checkpoint(model: TextClassifierModel, path, vocab: Vocabulary | None = None,
                    lexicon: Lexicon | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    params = list(model.named_parameters())
    manifest = {
        "format": FORMAT,
        "version": VERSION,
        "dtype": "float32",
        "byteorder": "little",
        "spec": model.spec.to_dict(),
        "parameters": [{"name": n, "shape": list(p.shape)} for n, p in params],
        "total_values": int(sum(p.size for _, p in params)),
    }
    tmp = Path(tempfile.mkdtemp(dir=path.parent, prefix=f".{path.name}.tmp"))
    try:
        with open(tmp / WEIGHTS, "wb") as fh:
            for _, p in params:
                fh.write(np.ascontiguousarray(p.data, dtype=_DTYPE).tobytes())
        if vocab is not None:
            vocab.save(tmp / VOCAB)
        if lexicon is not None and len(lexicon):
            (tmp / LEXICON).write_text("\n".join(lexicon.words()) + "\n", encoding="utf-8")
        # manifest last: a directory without one is never loadable
        (tmp / MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
        old = None
        if path.exists():
            old = path.with_name(f".{path.name}.old")
            if old.exists():
                shutil.rmtree(old)
            os.replace(path, old)
        os.replace(tmp, path)
        if old is not None:
            shutil.rmtree(old)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return path


def read_manifest(path) -> dict:
    path = Path(path)
    try:
        manifest = json.loads((path / MANIFEST).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CorruptionError(f"{path}: no manifest") from None
    except json.JSONDecodeError as exc:
        raise CorruptionError(f"{path}: manifest is not valid JSON ({exc})") from None
    if manifest.get("format") != FORMAT or manifest.get("version") != VERSION:
        raise CorruptionError(f"{path}: not a {FORMAT} v{VERSION} manifest")
    return manifest


def load_checkpoint(path) -> TextClassifierModel:
    """Rebuild the model and load its weights; nothing is returned on failure."""
    path = Path(path)
    manifest = read_manifest(path)
    try:
        spec = ModelSpec.from_dict(manifest["spec"])
    except (ConfigError, TypeError, KeyError) as exc:
        raise CorruptionError(f"{path}: invalid model spec in manifest ({exc})") from None
    if spec.vocab_size is None:
        raise CorruptionError(f"{path}: manifest spec has no vocab_size")
    table = EmbeddingTable(np.zeros((spec.vocab_size, spec.embed_dim), dtype=np.float32),
                           spec.embeddings_trainable)
    model = build_model(spec, table, rng=0)
    expected = dict(model.named_parameters())
    listed = manifest.get("parameters", [])
    names = [e["name"] for e in listed]
    if sorted(names) != sorted(expected) or len(set(names)) != len(names):
        raise CorruptionError(f"{path}: manifest parameters {sorted(names)} do not match the "
                              f"{spec.kind} architecture {sorted(expected)}")
    for entry in listed:
        want = expected[entry["name"]].shape
        if tuple(entry["shape"]) != want:
            raise CorruptionError(f"{path}: parameter {entry['name']} has shape {entry['shape']} "
                                  f"in manifest but the architecture needs {list(want)}")
    total = sum(int(np.prod(e["shape"])) for e in listed)
    if manifest.get("total_values") != total:
        raise CorruptionError(f"{path}: manifest total_values {manifest.get('total_values')} "
                              f"disagrees with parameter shapes ({total})")
    weights_path = path / WEIGHTS
    size = weights_path.stat().st_size if weights_path.exists() else -1
    if size != total * _DTYPE.itemsize:
        raise CorruptionError(f"{path}: weights file has {size} bytes, manifest needs "
                              f"{total * _DTYPE.itemsize}")
    flat = np.fromfile(weights_path, dtype=_DTYPE)
    state, offset = {}, 0
    for entry in listed:
        n = int(np.prod(entry["shape"]))
        state[entry["name"]] = flat[offset:offset + n].reshape(entry["shape"]).astype(np.float32)
        offset += n
    model.load_state_dict(state)
    return model


def load_vocab(path) -> Vocabulary:
    vocab_path = Path(path) / VOCAB
    if not vocab_path.exists():
        raise ConfigError(f"{path}: checkpoint has no {VOCAB}")
    return Vocabulary.load(vocab_path)


def load_lexicon(path) -> Lexicon | None:
    lex_path = Path(path) / LEXICON
    return Lexicon.from_file(lex_path) if lex_path.exists() else None
