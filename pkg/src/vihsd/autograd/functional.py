"""Fused layer primitives with hand-written backward rules."""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ConfigError, DataError, DimensionError
from ..rng import RngState
from .tensor import Function, Tensor, as_tensor

PAD_INDEX = 0


class EmbeddingLookup(Function):
    def forward(self, weights, ids, pad_index):
        self.ids, self.shape, self.pad_index = ids, weights.shape, pad_index
        return weights[ids]

    def backward(self, grad):
        dw = np.zeros(self.shape, dtype=grad.dtype)
        np.add.at(dw, self.ids.reshape(-1), grad.reshape(-1, self.shape[1]))
        if self.pad_index is not None:
            dw[self.pad_index] = 0
        return (dw,)


def embedding_lookup(weights: Tensor, ids, pad_index: int | None = PAD_INDEX) -> Tensor:
    """Gather rows of ``weights`` for an integer id matrix.

    The PAD row never receives gradient, so it stays at whatever value it was
    initialised with (zero for tables built by this package).
    """
    ids = np.asarray(ids)
    if not np.issubdtype(ids.dtype, np.integer):
        raise DataError(f"token ids must be integers, got dtype {ids.dtype}")
    bad = np.argwhere((ids < 0) | (ids >= weights.shape[0]))
    if len(bad):
        pos = tuple(int(i) for i in bad[0])
        raise DataError(f"token id {int(ids[pos])} at position {pos} outside vocabulary "
                        f"of size {weights.shape[0]}")
    return EmbeddingLookup.apply(weights, ids=ids, pad_index=pad_index)


class _MaskMul(Function):
    def forward(self, x, mask):
        self.mask = mask
        return x * mask

    def backward(self, grad):
        return (grad * self.mask,)


def spatial_dropout_1d(x: Tensor, rate: float, training: bool, rng: RngState | None = None) -> Tensor:
    """Drop whole feature channels of a ``[batch, time, channels]`` tensor.

    One Bernoulli draw per (batch, channel) is shared by every timestep;
    survivors are scaled by ``1 / (1 - rate)``.
    """
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if x.ndim != 3:
        raise DimensionError(f"spatial dropout expects [batch, time, channels], got {x.shape}")
    if rng is None:
        raise ConfigError("training-mode dropout needs an rng")
    keep = rng.random((x.shape[0], 1, x.shape[2])) >= rate
    mask = (keep / (1.0 - rate)).astype(x.dtype)
    return _MaskMul.apply(x, mask=mask)


class Conv1D(Function):
    def forward(self, x, kernels, bias, relu):
        f, k, c = kernels.shape
        b, t, _ = x.shape
        # [b, t-k+1, c, k] -> [b, t-k+1, k, c] so the flat window matches kernel layout
        windows = sliding_window_view(x, k, axis=1).transpose(0, 1, 3, 2).reshape(b, t - k + 1, k * c)
        self.windows, self.kflat = windows, kernels.reshape(f, k * c)
        self.x_shape, self.k_shape = x.shape, kernels.shape
        out = windows @ self.kflat.T + bias
        self.mask = out > 0 if relu else None
        return out * self.mask if relu else out

    def backward(self, grad):
        if self.mask is not None:
            grad = grad * self.mask
        f, k, c = self.k_shape
        b, t, _ = self.x_shape
        steps = t - k + 1
        dk = np.einsum("btf,btj->fj", grad, self.windows).reshape(self.k_shape)
        db = grad.sum(axis=(0, 1))
        dwin = (grad @ self.kflat).reshape(b, steps, k, c)
        dx = np.zeros(self.x_shape, dtype=grad.dtype)
        for j in range(k):
            dx[:, j:j + steps, :] += dwin[:, :, j, :]
        return dx, dk, db


def conv1d(x: Tensor, kernels: Tensor, bias: Tensor, activation: str | None = "relu") -> Tensor:
    """Valid (unpadded) 1-D convolution over time.

    ``x`` is ``[batch, time, in_channels]`` and ``kernels`` is
    ``[filters, width, in_channels]``; the result is
    ``[batch, time - width + 1, filters]``.
    """
    if activation not in (None, "relu"):
        raise ConfigError(f"unsupported conv activation {activation!r}")
    if x.ndim != 3 or kernels.ndim != 3 or x.shape[2] != kernels.shape[2]:
        raise DimensionError(f"conv1d shape mismatch: input {x.shape}, kernels {kernels.shape}")
    if bias.shape != (kernels.shape[0],):
        raise DimensionError(f"conv1d bias {bias.shape} does not match kernels {kernels.shape}")
    if kernels.shape[1] < 1 or x.shape[1] < kernels.shape[1]:
        raise DimensionError(f"conv1d sequence length {x.shape[1]} shorter than kernel width "
                             f"{kernels.shape[1]} (input {x.shape}, kernels {kernels.shape})")
    return Conv1D.apply(x, kernels, bias, relu=activation == "relu")


class GlobalMaxPool(Function):
    def forward(self, x):
        # np.argmax returns the first maximum, so ties go to the earliest step
        self.idx = np.argmax(x, axis=1)[:, None, :]
        self.shape = x.shape
        return np.take_along_axis(x, self.idx, axis=1)[:, 0, :]

    def backward(self, grad):
        dx = np.zeros(self.shape, dtype=grad.dtype)
        np.put_along_axis(dx, self.idx, grad[:, None, :], axis=1)
        return (dx,)


def global_max_pool(x: Tensor) -> Tensor:
    if x.ndim != 3:
        raise DimensionError(f"global max pool expects [batch, time, channels], got {x.shape}")
    if x.shape[1] == 0:
        raise DimensionError(f"global max pool over empty time axis: {x.shape}")
    return GlobalMaxPool.apply(x)


def dense(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    if x.ndim != 2 or weights.ndim != 2 or x.shape[1] != weights.shape[0] \
            or bias.shape != (weights.shape[1],):
        raise DimensionError(f"dense shape mismatch: x {x.shape}, W {weights.shape}, b {bias.shape}")
    return x @ weights + bias


class SoftmaxCrossEntropy(Function):
    def forward(self, logits, labels, weights):
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        log_probs = shifted - log_norm
        rows = np.arange(len(labels))
        self.probs = np.exp(log_probs)
        self.labels = labels
        self.row_w = weights[labels]
        return np.asarray(np.mean(-log_probs[rows, labels] * self.row_w), dtype=logits.dtype)

    def backward(self, grad):
        d = self.probs.copy()
        d[np.arange(len(self.labels)), self.labels] -= 1
        d *= (self.row_w / len(self.labels))[:, None]
        return (d * grad,)


def softmax_cross_entropy(logits: Tensor, labels, class_weights=None) -> Tensor:
    """Mean over the batch of ``w[y] * -log softmax(logits)[y]``."""
    logits = as_tensor(logits)
    if logits.ndim != 2:
        raise DimensionError(f"logits must be [batch, classes], got {logits.shape}")
    labels = np.asarray(labels)
    n, classes = logits.shape
    if labels.shape != (n,):
        raise DimensionError(f"labels shape {labels.shape} does not match logits {logits.shape}")
    bad = np.flatnonzero((labels < 0) | (labels >= classes))
    if len(bad):
        raise DataError(f"label {labels[bad[0]]} at row {int(bad[0])} outside 0..{classes - 1}")
    if class_weights is None:
        weights = np.ones(classes, dtype=logits.dtype)
    else:
        weights = np.asarray(class_weights.data if isinstance(class_weights, Tensor) else class_weights,
                             dtype=logits.dtype)
        if weights.shape != (classes,):
            raise DimensionError(f"class weights {weights.shape} do not match {classes} classes")
        if np.any(weights <= 0):
            raise ConfigError(f"class weights must be positive, got {weights.tolist()}")
    return SoftmaxCrossEntropy.apply(logits, labels=labels.astype(np.int64), weights=weights)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax on a plain array, computed in float64."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)
