"""Optimisation, data splitting and macro-F1 evaluation."""
from __future__ import annotations

import csv
import dataclasses
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .autograd import softmax_cross_entropy
from .errors import ConfigError, ContractError, DataError, NumericalError
from .io_utils import atomic_write_text
from .models import TextClassifierModel, predict
from .nn import Parameter
from .rng import as_rng
from .text import LABEL_NAMES, EncodedBatch

logger = logging.getLogger(__name__)

CLASS_WEIGHTING = ("none", "inverse_frequency")


@dataclass
class TrainConfig:
    batch_size: int = 32
    max_epochs: int = 50
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    early_stopping_patience: int = 5
    seed: int = 1234
    class_weighting: str = "inverse_frequency"

    def __post_init__(self):
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigError("batch_size and max_epochs must be positive")
        if self.learning_rate < 0 or not math.isfinite(self.learning_rate):
            raise ConfigError(f"learning_rate must be finite and >= 0, got {self.learning_rate}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1) or self.eps <= 0:
            raise ConfigError("Adam needs 0 <= beta < 1 and eps > 0")
        if self.early_stopping_patience < 1:
            raise ConfigError("early_stopping_patience must be >= 1")
        if self.class_weighting not in CLASS_WEIGHTING:
            raise ConfigError(f"class_weighting must be one of {CLASS_WEIGHTING}, "
                              f"got {self.class_weighting!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**data)


class Adam:
    """Adam with bias correction (Kingma & Ba, 2015)."""

    def __init__(self, params: Sequence[Parameter], lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = [p for p in params if p.requires_grad]
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        self.t += 1
        c1 = 1 - self.beta1 ** self.t
        c2 = 1 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            update = self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            p.data -= update.astype(p.dtype)


def class_weights(counts) -> np.ndarray:
    """Inverse-frequency weights ``N / (C * n_c)``."""
    counts = np.asarray(counts, dtype=np.float64)
    if np.any(counts <= 0):
        raise ConfigError(f"every class needs at least one example for inverse-frequency "
                          f"weights (counts {counts.astype(int).tolist()}); use class weighting 'none'")
    return counts.sum() / (len(counts) * counts)


def label_distribution(labels, num_classes: int = 3) -> np.ndarray:
    return np.bincount(np.asarray(labels, dtype=np.int64), minlength=num_classes)


def stratified_split(labels, val_fraction: float, seed=None):
    """Per-class random split; returns sorted ``(train_idx, val_idx)``.

    Each class contributes ``floor(n_c * val_fraction + 0.5)`` rows to
    validation (round half up).
    """
    if not 0.0 < val_fraction < 1.0:
        raise ConfigError(f"val_fraction must lie strictly between 0 and 1, got {val_fraction}")
    labels = np.asarray(labels)
    rng = as_rng(seed)
    val = []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        take = int(math.floor(len(members) * val_fraction + 0.5))
        val.extend(rng.permutation(members)[:take].tolist())
    val_idx = np.sort(np.array(val, dtype=np.int64))
    train_idx = np.setdiff1d(np.arange(len(labels)), val_idx)
    if len(val_idx) == 0 or len(train_idx) == 0:
        raise ConfigError(f"val_fraction {val_fraction} leaves an empty side "
                          f"({len(train_idx)} train / {len(val_idx)} validation rows)")
    return train_idx, val_idx


def _safe_div(num, den):
    return np.divide(num, den, out=np.zeros_like(num, dtype=np.float64), where=den != 0)


@dataclass
class EvalReport:
    confusion: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    macro_f1: float
    micro_f1: float
    weighted_f1: float
    accuracy: float
    label_names: tuple[str, ...] = LABEL_NAMES

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    def to_dict(self) -> dict:
        return {
            "confusion": self.confusion.tolist(),
            "precision": self.precision.tolist(),
            "recall": self.recall.tolist(),
            "f1": self.f1.tolist(),
            "support": self.support.tolist(),
            "macro_f1": self.macro_f1,
            "micro_f1": self.micro_f1,
            "weighted_f1": self.weighted_f1,
            "accuracy": self.accuracy,
            "total": self.total,
        }

    def format(self) -> str:
        """Human-readable report; scores as percentages with 3 decimals."""
        names = self.label_names
        width = max(len(n) for n in names) + 2
        lines = ["Confusion matrix (rows = gold, columns = predicted)",
                 " " * width + "".join(f"{n:>{width}}" for n in names)]
        for name, row in zip(names, self.confusion):
            lines.append(f"{name:<{width}}" + "".join(f"{int(v):>{width}}" for v in row))
        lines.append("")
        lines.append(f"{'class':<{width}}{'precision':>11}{'recall':>11}{'f1':>11}{'support':>9}")
        for i, name in enumerate(names):
            lines.append(f"{name:<{width}}{100 * self.precision[i]:>11.3f}{100 * self.recall[i]:>11.3f}"
                         f"{100 * self.f1[i]:>11.3f}{int(self.support[i]):>9d}")
        lines.append("")
        lines.append(f"macro-F1    {100 * self.macro_f1:.3f}")
        lines.append(f"micro-F1    {100 * self.micro_f1:.3f}")
        lines.append(f"weighted-F1 {100 * self.weighted_f1:.3f}")
        lines.append(f"accuracy    {100 * self.accuracy:.3f}")
        lines.append(f"total       {self.total}")
        return "\n".join(lines)

    def to_csv(self, path) -> None:
        fh = io.StringIO()
        w = csv.writer(fh)
        w.writerow(["class", "precision", "recall", "f1", "support"])
        for i, name in enumerate(self.label_names):
            w.writerow([name, f"{self.precision[i]:.6f}", f"{self.recall[i]:.6f}",
                        f"{self.f1[i]:.6f}", int(self.support[i])])
        w.writerow(["macro", "", "", f"{self.macro_f1:.6f}", self.total])
        w.writerow(["micro", "", "", f"{self.micro_f1:.6f}", self.total])
        w.writerow(["weighted", "", "", f"{self.weighted_f1:.6f}", self.total])
        atomic_write_text(path, fh.getvalue())


def evaluate_predictions(gold, pred, num_classes: int = 3) -> EvalReport:
    """Confusion matrix and P/R/F1 with every 0/0 taken as 0."""
    gold = np.asarray(gold, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if gold.shape != pred.shape:
        raise DataError(f"{len(gold)} gold labels vs {len(pred)} predictions")
    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(confusion, (gold, pred), 1)
    tp = np.diag(confusion).astype(np.float64)
    support = confusion.sum(axis=1)
    predicted = confusion.sum(axis=0)
    precision = _safe_div(tp, predicted.astype(np.float64))
    recall = _safe_div(tp, support.astype(np.float64))
    f1 = _safe_div(2 * precision * recall, precision + recall)
    n = confusion.sum()
    accuracy = float(tp.sum() / n) if n else 0.0
    weighted = float((f1 * support).sum() / n) if n else 0.0
    return EvalReport(confusion, precision, recall, f1, support,
                      macro_f1=float(f1.mean()), micro_f1=accuracy,
                      weighted_f1=weighted, accuracy=accuracy,
                      label_names=LABEL_NAMES if num_classes == 3 else
                      tuple(str(i) for i in range(num_classes)))


def evaluate(model: TextClassifierModel, data: EncodedBatch, batch_size: int = 256) -> EvalReport:
    if data.labels is None:
        raise ContractError("evaluate() needs labelled data")
    pred, _ = predict(model, data, batch_size)
    return evaluate_predictions(data.labels, pred, model.spec.num_classes)


@dataclass
class History:
    records: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_macro_f1: float = -1.0
    best_state: dict | None = None
    stopped_early: bool = False

    FIELDS = ("epoch", "train_loss", "val_macro_f1", "val_accuracy",
              "val_f1_clean", "val_f1_offensive", "val_f1_hate")

    def to_csv(self, path) -> None:
        fh = io.StringIO()
        w = csv.DictWriter(fh, fieldnames=self.FIELDS)
        w.writeheader()
        for rec in self.records:
            w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in rec.items()})
        atomic_write_text(path, fh.getvalue())


def _epoch_loss(model, data, weights, cfg, optimizer, rng):
    order = rng.permutation(len(data))
    total = 0.0
    for start in range(0, len(order), cfg.batch_size):
        idx = order[start:start + cfg.batch_size]
        logits = model(data.ids[idx], training=True, rng=rng)
        loss = softmax_cross_entropy(logits, data.labels[idx], weights)
        value = loss.item()
        if not math.isfinite(value):
            raise NumericalError(f"loss became {value} at batch starting {start}; "
                                 f"try a smaller learning rate than {cfg.learning_rate}")
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        total += value * len(idx)
    return total / len(order)


def fit(model: TextClassifierModel, train: EncodedBatch, val: EncodedBatch | None,
        cfg: TrainConfig, callback=None) -> History:
    """Train with Adam on weighted cross-entropy, early-stopping on validation macro-F1.

    Without ``val`` the training set doubles as the validation set.  The model
    ends holding the best-scoring weights, which are also kept in
    ``history.best_state``.  Training stops once patience runs out or once
    validation macro-F1 reaches 1.0, which cannot be improved on.
    """
    if len(train) == 0:
        raise ConfigError("training set is empty")
    if train.labels is None:
        raise ContractError("training data needs labels")
    val = train if val is None else val
    if val.labels is None or len(val) == 0:
        raise ConfigError("validation set is empty or unlabelled")
    num_classes = model.spec.num_classes
    weights = None
    if cfg.class_weighting == "inverse_frequency":
        weights = class_weights(label_distribution(train.labels, num_classes))
    rng = as_rng(cfg.seed)
    optimizer = Adam(model.parameters(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    history = History()
    stale = 0
    for epoch in range(1, cfg.max_epochs + 1):
        loss = _epoch_loss(model, train, weights, cfg, optimizer, rng)
        report = evaluate(model, val)
        record = {"epoch": epoch, "train_loss": loss, "val_macro_f1": report.macro_f1,
                  "val_accuracy": report.accuracy}
        for name, f1 in zip(LABEL_NAMES, report.f1):
            record[f"val_f1_{name}"] = float(f1)
        history.records.append(record)
        logger.info("epoch %d loss %.5f val macro-F1 %.5f", epoch, loss, report.macro_f1)
        if callback is not None:
            callback(record)
        if report.macro_f1 > history.best_macro_f1:
            history.best_macro_f1 = report.macro_f1
            history.best_epoch = epoch
            history.best_state = model.state_dict()
            stale = 0
        else:
            stale += 1
        if history.best_macro_f1 >= 1.0:
            break
        if stale >= cfg.early_stopping_patience:
            history.stopped_early = True
            break
    model.load_state_dict(history.best_state)
    return history
