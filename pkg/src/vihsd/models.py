"""The three classifiers: TextCNN, Bi-GRU-CNN and Bi-GRU-LSTM-CNN.

Topologies (``B`` batch, ``T`` max_len):

* ``bigru-lstm-cnn``: embedding -> spatial dropout -> Bi-GRU over the full
  sequence -> ``lstm_blocks`` parallel Bi-LSTMs reading the shared Bi-GRU
  output, concatenated on features -> conv1d (valid, ReLU) -> global max
  pool -> dense;
* ``bigru-cnn``: the same without the Bi-LSTM stage;
* ``textcnn``: embedding -> spatial dropout -> one conv1d per kernel width
  over the embeddings -> global max pool each -> concat -> dense.

When several kernel widths are configured for a recurrent model, each width
gets its own conv + pool branch and the pooled vectors are concatenated.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .autograd import Tensor, concat, no_grad, softmax
from .embeddings import EmbeddingTable
from .errors import ConfigError, DimensionError
from .nn import GRU, LSTM, Bidirectional, Conv1D, Dense, Embedding, GlobalMaxPool1D, Module, \
    SpatialDropout1D
from .rng import as_rng
from .text import MAX_LEN, EncodedBatch

EMBED_DIM = 300
DROPOUT_RATE = 0.2
RECURRENT_UNITS = 112
LSTM_BLOCKS = 2
NUM_CLASSES = 3

TEXTCNN, BIGRU_CNN, BIGRU_LSTM_CNN = "textcnn", "bigru-cnn", "bigru-lstm-cnn"
KINDS = (TEXTCNN, BIGRU_CNN, BIGRU_LSTM_CNN)
DISPLAY_NAMES = {TEXTCNN: "TextCNN", BIGRU_CNN: "Bi-GRU-CNN", BIGRU_LSTM_CNN: "Bi-GRU-LSTM-CNN"}

_CONV_DEFAULTS = {
    TEXTCNN: (100, (3, 4, 5)),
    BIGRU_CNN: (64, (3,)),
    BIGRU_LSTM_CNN: (64, (3,)),
}


@dataclass
class ModelSpec:
    kind: str = BIGRU_LSTM_CNN
    vocab_size: int | None = None
    max_len: int = MAX_LEN
    embed_dim: int = EMBED_DIM
    dropout_rate: float = DROPOUT_RATE
    gru_units: int = RECURRENT_UNITS
    lstm_units: int = RECURRENT_UNITS
    lstm_blocks: int = LSTM_BLOCKS
    conv_filters: int | None = None
    kernel_widths: tuple[int, ...] | None = None
    num_classes: int = NUM_CLASSES
    embeddings_trainable: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        filters, widths = _CONV_DEFAULTS[self.kind]
        if self.conv_filters is None:
            self.conv_filters = filters
        self.kernel_widths = tuple(widths if self.kernel_widths is None else self.kernel_widths)
        self.validate()

    def validate(self) -> None:
        sizes = dict(max_len=self.max_len, embed_dim=self.embed_dim, gru_units=self.gru_units,
                     lstm_units=self.lstm_units, lstm_blocks=self.lstm_blocks,
                     conv_filters=self.conv_filters, num_classes=self.num_classes)
        for name, value in sizes.items():
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.vocab_size is not None and self.vocab_size < 2:
            raise ConfigError(f"vocab_size must be >= 2, got {self.vocab_size}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if not self.kernel_widths or len(set(self.kernel_widths)) != len(self.kernel_widths):
            raise ConfigError(f"kernel_widths must be non-empty and distinct, got {self.kernel_widths}")
        for k in self.kernel_widths:
            if not 1 <= k <= self.max_len:
                raise ConfigError(f"kernel width {k} must lie in 1..max_len={self.max_len}")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["kernel_widths"] = list(self.kernel_widths)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ModelSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown model spec keys: {sorted(unknown)}")
        return cls(**data)

    @property
    def display_name(self) -> str:
        return DISPLAY_NAMES[self.kind]


class TextClassifierModel(Module):
    """Shared pieces: embedding + dropout in front, conv/pool/dense at the back."""

    def __init__(self, spec: ModelSpec, table: EmbeddingTable, rng):
        super().__init__()
        self.spec = spec
        self.embedding = Embedding(table.weights, trainable=spec.embeddings_trainable)
        self.dropout = SpatialDropout1D(spec.dropout_rate)
        self.pool = GlobalMaxPool1D()

    def _build_head(self, in_channels: int, rng) -> None:
        spec = self.spec
        self.conv_names = []
        for k in spec.kernel_widths:
            name = f"conv_{k}"
            setattr(self, name, Conv1D(in_channels, spec.conv_filters, k, "relu", rng))
            self.conv_names.append(name)
        self.head = Dense(spec.conv_filters * len(spec.kernel_widths), spec.num_classes, rng)

    def _head(self, features: Tensor) -> Tensor:
        pooled = [self.pool(getattr(self, n)(features)) for n in self.conv_names]
        merged = pooled[0] if len(pooled) == 1 else concat(pooled, axis=-1)
        return self.head(merged)

    def encode(self, x: Tensor) -> Tensor:
        """Sequence features fed to the conv head."""
        raise NotImplementedError

    def forward(self, ids, training: bool = False, rng=None) -> Tensor:
        ids = np.asarray(ids)
        if ids.ndim != 2 or ids.shape[1] != self.spec.max_len:
            raise DimensionError(f"expected ids of shape [batch, {self.spec.max_len}], got {ids.shape}")
        x = self.dropout(self.embedding(ids), training=training, rng=rng)
        return self._head(self.encode(x))


class TextCNN(TextClassifierModel):
    def __init__(self, spec, table, rng):
        super().__init__(spec, table, rng)
        self._build_head(spec.embed_dim, rng)

    def encode(self, x):
        return x


class BiGruCnn(TextClassifierModel):
    def __init__(self, spec, table, rng):
        super().__init__(spec, table, rng)
        self.bigru = Bidirectional(GRU, spec.embed_dim, spec.gru_units, rng)
        self._build_head(self.bigru.output_dim, rng)

    def encode(self, x):
        return self.bigru(x)


class BiGruLstmCnn(TextClassifierModel):
    def __init__(self, spec, table, rng):
        super().__init__(spec, table, rng)
        self.bigru = Bidirectional(GRU, spec.embed_dim, spec.gru_units, rng)
        self.lstm_names = []
        for i in range(spec.lstm_blocks):
            name = f"bilstm_{i}"
            setattr(self, name, Bidirectional(LSTM, self.bigru.output_dim, spec.lstm_units, rng))
            self.lstm_names.append(name)
        self._build_head(self.lstm_output_dim, rng)

    @property
    def lstm_output_dim(self) -> int:
        return 2 * self.spec.lstm_units * self.spec.lstm_blocks

    def encode(self, x):
        shared = self.bigru(x)
        blocks = [getattr(self, n)(shared) for n in self.lstm_names]
        return blocks[0] if len(blocks) == 1 else concat(blocks, axis=-1)


_MODEL_CLASSES = {TEXTCNN: TextCNN, BIGRU_CNN: BiGruCnn, BIGRU_LSTM_CNN: BiGruLstmCnn}


def build_model(spec: ModelSpec, table: EmbeddingTable, rng=None) -> TextClassifierModel:
    """Instantiate the architecture named by ``spec.kind`` around ``table``."""
    if table.embed_dim != spec.embed_dim:
        raise ConfigError(f"embedding table has dimension {table.embed_dim} but spec.embed_dim "
                          f"is {spec.embed_dim}")
    if spec.vocab_size is None:
        spec = dataclasses.replace(spec, vocab_size=table.vocab_size)
    elif spec.vocab_size != table.vocab_size:
        raise ConfigError(f"embedding table has {table.vocab_size} rows but spec.vocab_size "
                          f"is {spec.vocab_size}")
    return _MODEL_CLASSES[spec.kind](spec, table, as_rng(rng))


def param_count(model: Module, trainable_only: bool = False) -> int:
    """Number of parameters, never counting the pinned PAD embedding row."""
    total = 0
    for module_name, p in model.named_parameters():
        if trainable_only and not p.requires_grad:
            continue
        n = p.size
        if module_name.endswith("embedding.weight"):
            n -= p.shape[1]
        total += n
    return total


def predict(model: TextClassifierModel, batch, batch_size: int = 256):
    """Labels and class probabilities for every row.

    Ties in the argmax go to the lowest label index.
    """
    ids = batch.ids if isinstance(batch, EncodedBatch) else np.asarray(batch)
    probs = np.zeros((len(ids), model.spec.num_classes), dtype=np.float64)
    with no_grad():
        for start in range(0, len(ids), batch_size):
            logits = model(ids[start:start + batch_size], training=False)
            probs[start:start + batch_size] = softmax(logits.data)
    return probs.argmax(axis=1), probs
