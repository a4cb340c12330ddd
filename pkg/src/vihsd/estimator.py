"""scikit-learn compatible wrappers around the text pipeline and classifiers."""
from __future__ import annotations

import os

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted, column_or_1d

from . import checkpoint as ckpt
from .embeddings import VecFile, build_embedding_matrix, parse_vec_file, random_embedding_table
from .errors import ConfigError, DataError
from .models import BIGRU_LSTM_CNN, ModelSpec, build_model, predict
from .rng import make_rng
from .text import MAX_LEN, EncodedBatch, Lexicon, Vocabulary, build_vocab, encode_corpus, preprocess
from .training import EvalReport, TrainConfig, evaluate_predictions, fit, stratified_split


def check_texts(X) -> list[str]:
    """Accept any iterable of strings (list, array, pandas Series)."""
    if isinstance(X, str):
        raise DataError("expected a collection of texts, got a single string")
    try:
        texts = list(X)
    except TypeError:
        raise DataError(f"expected an iterable of texts, got {type(X).__name__}") from None
    for i, t in enumerate(texts):
        if not isinstance(t, str):
            raise DataError(f"row {i}: expected str, got {type(t).__name__}")
    return texts


def check_labels(y, n: int, num_classes: int = 3) -> np.ndarray:
    y = column_or_1d(np.asarray(y), warn=False)
    if len(y) != n:
        raise DataError(f"{n} texts but {len(y)} labels")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.mod(y, 1) == 0):
            raise DataError("labels must be integers")
    y = y.astype(np.int64)
    bad = np.flatnonzero((y < 0) | (y >= num_classes))
    if len(bad):
        raise DataError(f"label {y[bad[0]]} at row {int(bad[0])} not in 0..{num_classes - 1}")
    return y


def _as_lexicon(lexicon) -> Lexicon | None:
    if lexicon is None or isinstance(lexicon, Lexicon):
        return lexicon
    if isinstance(lexicon, (str, os.PathLike)):
        return Lexicon.from_file(lexicon)
    return Lexicon(lexicon)


class TextEncoder(TransformerMixin, BaseEstimator):
    """Raw texts -> ``[n, max_len]`` token-id matrix.

    ``fit`` learns the vocabulary; ``transform`` normalises, tokenises and
    pads.
    """

    def __init__(self, max_len: int = MAX_LEN, min_frequency: int = 1, lexicon=None):
        self.max_len = max_len
        self.min_frequency = min_frequency
        self.lexicon = lexicon

    def fit(self, X, y=None):
        texts = check_texts(X)
        self.lexicon_ = _as_lexicon(self.lexicon)
        self.vocabulary_ = build_vocab(preprocess(texts, self.lexicon_), self.min_frequency)
        return self

    def encode(self, X, y=None) -> EncodedBatch:
        check_is_fitted(self, "vocabulary_")
        texts = check_texts(X)
        return encode_corpus(preprocess(texts, self.lexicon_), self.vocabulary_, y, self.max_len)

    def transform(self, X):
        return self.encode(X).ids

    def inverse_transform(self, ids):
        check_is_fitted(self, "vocabulary_")
        return [" ".join(self.vocabulary_.token(int(i)) for i in row if i != 0)
                for row in np.asarray(ids)]


class HateSpeechClassifier(ClassifierMixin, BaseEstimator):
    """Clean (0) / offensive (1) / hate (2) classifier over raw text.

    Hyperparameters mirror :class:`~vihsd.models.ModelSpec` and
    :class:`~vihsd.training.TrainConfig`.  ``vectors`` is a ``.vec`` path or
    a parsed :class:`~vihsd.embeddings.VecFile`; without it embeddings start
    random.  With ``val_fraction=0`` the training set is also used for
    early stopping.

    ``score`` returns macro-F1, the task metric, rather than accuracy.
    """

    def __init__(self, kind: str = BIGRU_LSTM_CNN, max_len: int = MAX_LEN, embed_dim: int = 300,
                 dropout_rate: float = 0.2, gru_units: int = 112, lstm_units: int = 112,
                 lstm_blocks: int = 2, conv_filters=None, kernel_widths=None,
                 embeddings_trainable: bool = True, vectors=None, lexicon=None,
                 min_frequency: int = 1, batch_size: int = 32, max_epochs: int = 50,
                 learning_rate: float = 1e-3, early_stopping_patience: int = 5,
                 class_weighting: str = "inverse_frequency", val_fraction: float = 0.1,
                 random_state: int = 1234, verbose: bool = False):
        self.kind = kind
        self.max_len = max_len
        self.embed_dim = embed_dim
        self.dropout_rate = dropout_rate
        self.gru_units = gru_units
        self.lstm_units = lstm_units
        self.lstm_blocks = lstm_blocks
        self.conv_filters = conv_filters
        self.kernel_widths = kernel_widths
        self.embeddings_trainable = embeddings_trainable
        self.vectors = vectors
        self.lexicon = lexicon
        self.min_frequency = min_frequency
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.learning_rate = learning_rate
        self.early_stopping_patience = early_stopping_patience
        self.class_weighting = class_weighting
        self.val_fraction = val_fraction
        self.random_state = random_state
        self.verbose = verbose

    def _model_spec(self) -> ModelSpec:
        return ModelSpec(kind=self.kind, max_len=self.max_len, embed_dim=self.embed_dim,
                         dropout_rate=self.dropout_rate, gru_units=self.gru_units,
                         lstm_units=self.lstm_units, lstm_blocks=self.lstm_blocks,
                         conv_filters=self.conv_filters,
                         kernel_widths=None if self.kernel_widths is None else tuple(self.kernel_widths),
                         embeddings_trainable=self.embeddings_trainable)

    def _train_config(self) -> TrainConfig:
        return TrainConfig(batch_size=self.batch_size, max_epochs=self.max_epochs,
                           learning_rate=self.learning_rate,
                           early_stopping_patience=self.early_stopping_patience,
                           seed=self.random_state, class_weighting=self.class_weighting)

    def _embedding_table(self, vocab: Vocabulary, rng):
        if self.vectors is None:
            return random_embedding_table(len(vocab), self.embed_dim, rng, self.embeddings_trainable)
        vec = self.vectors
        if not isinstance(vec, VecFile):
            vec = parse_vec_file(vec, keep=vocab.stoi)
        return build_embedding_matrix(vec, vocab, rng, self.embed_dim, self.embeddings_trainable)

    def fit(self, X, y):
        texts = check_texts(X)
        y = check_labels(y, len(texts))
        if not texts:
            raise ConfigError("training set is empty")
        spec = self._model_spec()
        cfg = self._train_config()
        if self.val_fraction:
            train_idx, val_idx = stratified_split(y, self.val_fraction, self.random_state)
        else:
            train_idx = val_idx = np.arange(len(texts))
        self.train_index_, self.val_index_ = train_idx, val_idx
        train_texts = [texts[i] for i in train_idx]
        self.encoder_ = TextEncoder(self.max_len, self.min_frequency, self.lexicon).fit(train_texts)
        rng = make_rng(self.random_state)
        table = self._embedding_table(self.encoder_.vocabulary_, rng)
        self.embedding_coverage_ = table.coverage
        self.model_ = build_model(spec, table, rng)
        train = self.encoder_.encode(train_texts, y[train_idx])
        val = None if self.val_fraction == 0 else self.encoder_.encode(
            [texts[i] for i in val_idx], y[val_idx])
        callback = (lambda r: print(f"epoch {r['epoch']:>3}  loss {r['train_loss']:.5f}  "
                                    f"val macro-F1 {100 * r['val_macro_f1']:.3f}")) \
            if self.verbose else None
        self.history_ = fit(self.model_, train, val, cfg, callback=callback)
        self.classes_ = np.arange(spec.num_classes)
        return self

    def _encode(self, X) -> EncodedBatch:
        check_is_fitted(self, "model_")
        return self.encoder_.encode(X)

    def predict_proba(self, X) -> np.ndarray:
        return predict(self.model_, self._encode(X))[1]

    def predict(self, X) -> np.ndarray:
        return predict(self.model_, self._encode(X))[0]

    def evaluate(self, X, y) -> EvalReport:
        texts = check_texts(X)
        y = check_labels(y, len(texts))
        return evaluate_predictions(y, self.predict(texts), len(self.classes_))

    def score(self, X, y, sample_weight=None) -> float:
        return self.evaluate(X, y).macro_f1

    @property
    def vocabulary_(self) -> Vocabulary:
        check_is_fitted(self, "encoder_")
        return self.encoder_.vocabulary_

    def save(self, path):
        check_is_fitted(self, "model_")
        return ckpt.save_checkpoint(self.model_, path, self.encoder_.vocabulary_, self.encoder_.lexicon_)

    @classmethod
    def from_checkpoint(cls, path) -> "HateSpeechClassifier":
        """Inference-ready estimator restored from a checkpoint directory."""
        model = ckpt.load_checkpoint(path)
        vocab = ckpt.load_vocab(path)
        if len(vocab) != model.spec.vocab_size:
            raise ConfigError(f"{path}: vocabulary has {len(vocab)} entries but the model "
                              f"expects {model.spec.vocab_size}")
        spec = model.spec
        est = cls(kind=spec.kind, max_len=spec.max_len, embed_dim=spec.embed_dim,
                  dropout_rate=spec.dropout_rate, gru_units=spec.gru_units,
                  lstm_units=spec.lstm_units, lstm_blocks=spec.lstm_blocks,
                  conv_filters=spec.conv_filters, kernel_widths=list(spec.kernel_widths),
                  embeddings_trainable=spec.embeddings_trainable)
        lexicon = ckpt.load_lexicon(path)
        est.encoder_ = TextEncoder(spec.max_len, lexicon=lexicon)
        est.encoder_.lexicon_ = lexicon
        est.encoder_.vocabulary_ = vocab
        est.model_ = model
        est.classes_ = np.arange(spec.num_classes)
        return est
