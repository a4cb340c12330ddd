"""Layers used by the three text classifiers.

Initialisation constants:

* input kernels (conv, dense, recurrent ``W``): Glorot uniform,
  ``limit = sqrt(6 / (fan_in + fan_out))``;
* recurrent kernels ``U``: uniform in ``±1 / sqrt(hidden)``;
* biases zero, except the LSTM forget gate which starts at 1.0.
"""
from __future__ import annotations

import numpy as np

from ..autograd import (
    Tensor,
    concat,
    conv1d,
    dense,
    embedding_lookup,
    global_max_pool,
    gru_cell_step,
    gru_sequence,
    lstm_cell_step,
    lstm_sequence,
    spatial_dropout_1d,
)
from ..errors import ConfigError, DimensionError
from ..rng import RngState, as_rng
from .module import Module, Parameter

FORGET_BIAS_INIT = 1.0


def glorot_uniform(rng: RngState, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(np.float32)


class Embedding(Module):
    """Lookup table whose row 0 (PAD) is pinned at zero."""

    def __init__(self, weights: np.ndarray, trainable: bool = True, pad_index: int = 0):
        super().__init__()
        weights = np.array(weights, dtype=np.float32)
        if weights.ndim != 2:
            raise DimensionError(f"embedding weights must be 2-D, got {weights.shape}")
        weights[pad_index] = 0.0
        self.pad_index = pad_index
        self.trainable = trainable
        self.weight = Parameter(weights, requires_grad=trainable)

    @property
    def vocab_size(self) -> int:
        return self.weight.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.weight.shape[1]

    def forward(self, ids) -> Tensor:
        return embedding_lookup(self.weight, ids, pad_index=self.pad_index)


class SpatialDropout1D(Module):
    def __init__(self, rate: float):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = rate

    def forward(self, x: Tensor, training: bool = False, rng: RngState | None = None) -> Tensor:
        return spatial_dropout_1d(x, self.rate, training, rng)


class Conv1D(Module):
    def __init__(self, in_channels: int, filters: int, kernel_width: int,
                 activation: str | None = "relu", rng=None):
        super().__init__()
        if kernel_width < 1 or filters < 1 or in_channels < 1:
            raise ConfigError(f"invalid conv sizes: in={in_channels}, filters={filters}, "
                              f"width={kernel_width}")
        rng = as_rng(rng)
        self.activation = activation
        self.kernel = Parameter(glorot_uniform(rng, (filters, kernel_width, in_channels),
                                               kernel_width * in_channels, kernel_width * filters))
        self.bias = Parameter(np.zeros(filters, dtype=np.float32))

    def forward(self, x: Tensor) -> Tensor:
        return conv1d(x, self.kernel, self.bias, self.activation)


class GlobalMaxPool1D(Module):
    def forward(self, x: Tensor) -> Tensor:
        return global_max_pool(x)


class Dense(Module):
    def __init__(self, in_dim: int, out_dim: int, rng=None):
        super().__init__()
        rng = as_rng(rng)
        self.weight = Parameter(glorot_uniform(rng, (in_dim, out_dim), in_dim, out_dim))
        self.bias = Parameter(np.zeros(out_dim, dtype=np.float32))

    def forward(self, x: Tensor) -> Tensor:
        return dense(x, self.weight, self.bias)


class _Recurrent(Module):
    gates = 0

    def __init__(self, in_dim: int, units: int, reverse: bool = False, rng=None):
        super().__init__()
        if in_dim < 1 or units < 1:
            raise ConfigError(f"invalid recurrent sizes: in={in_dim}, units={units}")
        rng = as_rng(rng)
        g = self.gates
        self.in_dim, self.units, self.reverse = in_dim, units, reverse
        self.W = Parameter(glorot_uniform(rng, (in_dim, g * units), in_dim, g * units))
        bound = 1.0 / np.sqrt(units)
        self.U = Parameter(rng.uniform(-bound, bound, size=(units, g * units)).astype(np.float32))
        self.b = Parameter(self._initial_bias())

    def _initial_bias(self):
        return np.zeros(self.gates * self.units, dtype=np.float32)


class LSTM(_Recurrent):
    """Full-sequence LSTM returning the hidden state at every step."""

    gates = 4

    def _initial_bias(self):
        b = np.zeros(4 * self.units, dtype=np.float32)
        b[self.units:2 * self.units] = FORGET_BIAS_INIT
        return b

    def forward(self, x: Tensor) -> Tensor:
        return lstm_sequence(x, self.W, self.U, self.b, reverse=self.reverse)

    def step(self, x_t: Tensor, h: Tensor, c: Tensor):
        return lstm_cell_step(x_t, h, c, self.W, self.U, self.b)


class GRU(_Recurrent):
    gates = 3

    def forward(self, x: Tensor) -> Tensor:
        return gru_sequence(x, self.W, self.U, self.b, reverse=self.reverse)

    def step(self, x_t: Tensor, h: Tensor) -> Tensor:
        return gru_cell_step(x_t, h, self.W, self.U, self.b)


class Bidirectional(Module):
    """Runs a forward and a time-reversed copy of a recurrent layer and
    concatenates their per-step outputs on the feature axis (forward first)."""

    def __init__(self, layer_cls, in_dim: int, units: int, rng=None):
        super().__init__()
        rng = as_rng(rng)
        self.forward_layer = layer_cls(in_dim, units, reverse=False, rng=rng)
        self.backward_layer = layer_cls(in_dim, units, reverse=True, rng=rng)
        self.units = units

    @property
    def output_dim(self) -> int:
        return 2 * self.units

    def forward(self, x: Tensor) -> Tensor:
        return concat([self.forward_layer(x), self.backward_layer(x)], axis=-1)
