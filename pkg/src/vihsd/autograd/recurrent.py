"""LSTM and GRU recurrences with manual backpropagation through time.

Gate parameters are stored concatenated along the last axis:

* LSTM: ``W [in, 4h]``, ``U [h, 4h]``, ``b [4h]`` in gate order
  (input, forget, cell candidate, output).
* GRU: ``W [in, 3h]``, ``U [h, 3h]``, ``b [3h]`` in gate order
  (update, reset, candidate).

The GRU uses ``h_t = (1 - z) * h_prev + z * candidate`` with the reset gate
applied to ``h_prev`` before the recurrent matmul of the candidate.

The single-step kernels below are shared by the per-step ops and by the
full-sequence ops, so unrolling a sequence step by step reproduces the
sequence op bit for bit.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..errors import DimensionError
from .tensor import Function, Tensor


def _lstm_step(x, h, c, W, U, b):
    H = h.shape[1]
    z = x @ W + h @ U + b
    i = expit(z[:, :H])
    f = expit(z[:, H:2 * H])
    g = np.tanh(z[:, 2 * H:3 * H])
    o = expit(z[:, 3 * H:])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    return h_new, c_new, (x, h, c, i, f, g, o, tc)


def _lstm_step_backward(dh, dc, cache, W, U):
    """Gradients of one LSTM step given upstream ``dh`` and ``dc``."""
    x, h, c, i, f, g, o, tc = cache
    dc = dc + dh * o * (1 - tc * tc)
    dz = np.concatenate([
        dc * g * i * (1 - i),
        dc * c * f * (1 - f),
        dc * i * (1 - g * g),
        dh * tc * o * (1 - o),
    ], axis=1)
    return dz @ W.T, dz @ U.T, dc * f, x.T @ dz, h.T @ dz, dz.sum(axis=0)


def _gru_step(x, h, W, U, b):
    H = h.shape[1]
    xw = x @ W + b
    hu = h @ U[:, :2 * H]
    z = expit(xw[:, :H] + hu[:, :H])
    r = expit(xw[:, H:2 * H] + hu[:, H:])
    rh = r * h
    cand = np.tanh(xw[:, 2 * H:] + rh @ U[:, 2 * H:])
    h_new = (1 - z) * h + z * cand
    return h_new, (x, h, z, r, rh, cand)


def _gru_step_backward(dh, cache, W, U):
    x, h, z, r, rh, cand = cache
    H = h.shape[1]
    da_c = dh * z * (1 - cand * cand)
    drh = da_c @ U[:, 2 * H:].T
    da_z = dh * (cand - h) * z * (1 - z)
    da_r = drh * h * r * (1 - r)
    da_zr = np.concatenate([da_z, da_r], axis=1)
    da = np.concatenate([da_zr, da_c], axis=1)
    dh_prev = dh * (1 - z) + drh * r + da_zr @ U[:, :2 * H].T
    dU = np.concatenate([h.T @ da_zr, rh.T @ da_c], axis=1)
    return da @ W.T, dh_prev, x.T @ da, dU, da.sum(axis=0)


def _check_params(kind, x_dim, h_dim, W, U, b, gates):
    if W.ndim != 2 or W.shape != (x_dim, gates * h_dim) or U.shape != (h_dim, gates * h_dim) \
            or b.shape != (gates * h_dim,):
        raise DimensionError(
            f"{kind} parameter shapes W {W.shape}, U {U.shape}, b {b.shape} do not fit "
            f"input dim {x_dim} and hidden size {h_dim}")


def _contig(a):
    return np.ascontiguousarray(a)


class LstmCell(Function):
    def forward(self, x, h, c, W, U, b):
        h_new, c_new, self.cache = _lstm_step(_contig(x), _contig(h), _contig(c), W, U, b)
        self.W, self.U = W, U
        return np.stack([h_new, c_new])

    def backward(self, grad):
        dx, dh, dc, dW, dU, db = _lstm_step_backward(grad[0], grad[1], self.cache, self.W, self.U)
        return dx, dh, dc, dW, dU, db


def lstm_cell_step(x: Tensor, h: Tensor, c: Tensor, W: Tensor, U: Tensor, b: Tensor):
    """One LSTM step; returns ``(h_t, c_t)``."""
    if x.ndim != 2 or h.ndim != 2 or h.shape != c.shape or x.shape[0] != h.shape[0]:
        raise DimensionError(f"lstm step shape mismatch: x {x.shape}, h {h.shape}, c {c.shape}")
    _check_params("lstm", x.shape[1], h.shape[1], W, U, b, 4)
    out = LstmCell.apply(x, h, c, W, U, b)
    return out[0], out[1]


class GruCell(Function):
    def forward(self, x, h, W, U, b):
        h_new, self.cache = _gru_step(_contig(x), _contig(h), W, U, b)
        self.W, self.U = W, U
        return h_new

    def backward(self, grad):
        return _gru_step_backward(grad, self.cache, self.W, self.U)


def gru_cell_step(x: Tensor, h: Tensor, W: Tensor, U: Tensor, b: Tensor) -> Tensor:
    if x.ndim != 2 or h.ndim != 2 or x.shape[0] != h.shape[0]:
        raise DimensionError(f"gru step shape mismatch: x {x.shape}, h {h.shape}")
    _check_params("gru", x.shape[1], h.shape[1], W, U, b, 3)
    return GruCell.apply(x, h, W, U, b)


class LstmSequence(Function):
    def forward(self, x, W, U, b, reverse):
        batch, steps, _ = x.shape
        H = U.shape[0]
        self.W, self.U, self.reverse = W, U, reverse
        self.x_shape = x.shape
        h = np.zeros((batch, H), dtype=x.dtype)
        c = np.zeros((batch, H), dtype=x.dtype)
        out = np.empty((batch, steps, H), dtype=x.dtype)
        self.caches = []
        for t in _time_order(steps, reverse):
            h, c, cache = _lstm_step(_contig(x[:, t, :]), h, c, W, U, b)
            out[:, t, :] = h
            self.caches.append(cache)
        return out

    def backward(self, grad):
        batch, steps, _ = self.x_shape
        H = self.U.shape[0]
        dx = np.zeros(self.x_shape, dtype=grad.dtype)
        dW = np.zeros_like(self.W)
        dU = np.zeros_like(self.U)
        db = np.zeros(self.W.shape[1], dtype=grad.dtype)
        dh = np.zeros((batch, H), dtype=grad.dtype)
        dc = np.zeros((batch, H), dtype=grad.dtype)
        order = list(_time_order(steps, self.reverse))
        for t, cache in zip(reversed(order), reversed(self.caches)):
            dxt, dh, dc, gW, gU, gb = _lstm_step_backward(dh + grad[:, t, :], dc, cache, self.W, self.U)
            dx[:, t, :] = dxt
            dW += gW
            dU += gU
            db += gb
        return dx, dW, dU, db


class GruSequence(Function):
    def forward(self, x, W, U, b, reverse):
        batch, steps, _ = x.shape
        H = U.shape[0]
        self.W, self.U, self.reverse = W, U, reverse
        self.x_shape = x.shape
        h = np.zeros((batch, H), dtype=x.dtype)
        out = np.empty((batch, steps, H), dtype=x.dtype)
        self.caches = []
        for t in _time_order(steps, reverse):
            h, cache = _gru_step(_contig(x[:, t, :]), h, W, U, b)
            out[:, t, :] = h
            self.caches.append(cache)
        return out

    def backward(self, grad):
        batch, steps, _ = self.x_shape
        H = self.U.shape[0]
        dx = np.zeros(self.x_shape, dtype=grad.dtype)
        dW = np.zeros_like(self.W)
        dU = np.zeros_like(self.U)
        db = np.zeros(self.W.shape[1], dtype=grad.dtype)
        dh = np.zeros((batch, H), dtype=grad.dtype)
        order = list(_time_order(steps, self.reverse))
        for t, cache in zip(reversed(order), reversed(self.caches)):
            dxt, dh, gW, gU, gb = _gru_step_backward(dh + grad[:, t, :], cache, self.W, self.U)
            dx[:, t, :] = dxt
            dW += gW
            dU += gU
            db += gb
        return dx, dW, dU, db


def _time_order(steps, reverse):
    return range(steps - 1, -1, -1) if reverse else range(steps)


def _check_sequence(kind, x, W, U, b, gates):
    if x.ndim != 3:
        raise DimensionError(f"{kind} expects [batch, time, features], got {x.shape}")
    if x.shape[1] == 0:
        raise DimensionError(f"{kind} got an empty time axis: {x.shape}")
    _check_params(kind, x.shape[2], U.shape[0], W, U, b, gates)


def lstm_sequence(x: Tensor, W: Tensor, U: Tensor, b: Tensor, reverse: bool = False) -> Tensor:
    """Run an LSTM from zero state over ``[batch, time, in]``; returns every hidden state.

    With ``reverse=True`` the recurrence runs from the last step to the first,
    and output position ``t`` still holds the state after reading ``x[:, t]``.
    """
    _check_sequence("lstm", x, W, U, b, 4)
    return LstmSequence.apply(x, W, U, b, reverse=reverse)


def gru_sequence(x: Tensor, W: Tensor, U: Tensor, b: Tensor, reverse: bool = False) -> Tensor:
    _check_sequence("gru", x, W, U, b, 3)
    return GruSequence.apply(x, W, U, b, reverse=reverse)
