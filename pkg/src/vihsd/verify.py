"""Self-checks run by ``vihsd verify``.

Every differentiable layer is compared against central differences in
float64 (h = 1e-3, at most 32 probed coordinates per tensor, pass below 1e-4
max relative error).  Conv and max-pool are compared with brute-force loops
and preprocessing with fixed golden strings.
"""
from __future__ import annotations

import contextlib
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .autograd import (
    Tensor,
    conv1d,
    dense,
    embedding_lookup,
    finite_diff_check,
    global_max_pool,
    gru_cell_step,
    gru_sequence,
    lstm_cell_step,
    lstm_sequence,
    softmax_cross_entropy,
    spatial_dropout_1d,
)
from .autograd import functional as F
from .autograd import recurrent as R
from .autograd.tensor import concat
from .embeddings import random_embedding_table
from .models import KINDS, ModelSpec, build_model
from .rng import make_rng
from .text import normalize_text

GRAD_TOL = 1e-4
ORACLE_TOL = 1e-6
STEP = 1e-3
MAX_PROBES = 32


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _t(rng, *shape):
    return Tensor(rng.normal(size=shape), requires_grad=True)


def _projection(rng, shape):
    weights = Tensor(rng.normal(size=shape))
    return lambda out: (out * weights).sum()


def _worst(f, tensors, rng) -> float:
    return max(finite_diff_check(f, t, STEP, max_probes=MAX_PROBES, rng=rng) for t in tensors)


def check_embedding(rng):
    E = _t(rng, 7, 4)
    ids = np.array([[0, 2, 5, 2], [1, 6, 0, 3]])
    proj = _projection(rng, (2, 4, 4))
    f = lambda th: proj(embedding_lookup(E, ids))
    non_pad = list(range(4, E.size))
    err = finite_diff_check(f, E, STEP, indices=non_pad)
    E.grad = None
    f(E).backward()
    if np.any(E.grad[0] != 0):
        return float("inf")
    return err


def check_spatial_dropout(rng):
    x = _t(rng, 2, 5, 4)
    proj = _projection(rng, (2, 5, 4))
    return _worst(lambda th: proj(spatial_dropout_1d(x, 0.2, True, make_rng(3))), [x], rng)


def check_conv1d(rng):
    x, K, b = _t(rng, 2, 6, 3), _t(rng, 2, 3, 3), _t(rng, 2)
    proj = _projection(rng, (2, 4, 2))
    return _worst(lambda th: proj(conv1d(x, K, b, "relu")), [x, K, b], rng)


def check_max_pool(rng):
    # well-separated values keep the argmax fixed under the finite-difference step
    x = Tensor(rng.permutation(30).reshape(2, 5, 3) * 0.1, requires_grad=True)
    proj = _projection(rng, (2, 3))
    return _worst(lambda th: proj(global_max_pool(x)), [x], rng)


def check_dense(rng):
    x, W, b = _t(rng, 3, 4), _t(rng, 4, 3), _t(rng, 3)
    proj = _projection(rng, (3, 3))
    return _worst(lambda th: proj(dense(x, W, b)), [x, W, b], rng)


def check_lstm(rng):
    x, h, c = _t(rng, 2, 3), _t(rng, 2, 2), _t(rng, 2, 2)
    W, U, b = _t(rng, 3, 8), _t(rng, 2, 8), _t(rng, 8)
    ph, pc = _projection(rng, (2, 2)), _projection(rng, (2, 2))

    def f(th):
        h1, c1 = lstm_cell_step(x, h, c, W, U, b)
        return ph(h1) + pc(c1)

    cell = _worst(f, [x, h, c, W, U, b], rng)
    xs = _t(rng, 2, 4, 3)
    proj = _projection(rng, (2, 4, 2))
    seq = _worst(lambda th: proj(lstm_sequence(xs, W, U, b)), [xs, W, U, b], rng)
    return max(cell, seq)


def check_gru(rng):
    x, h = _t(rng, 2, 3), _t(rng, 2, 2)
    W, U, b = _t(rng, 3, 6), _t(rng, 2, 6), _t(rng, 6)
    proj = _projection(rng, (2, 2))
    cell = _worst(lambda th: proj(gru_cell_step(x, h, W, U, b)), [x, h, W, U, b], rng)
    xs = _t(rng, 2, 4, 3)
    sproj = _projection(rng, (2, 4, 2))
    seq = _worst(lambda th: sproj(gru_sequence(xs, W, U, b)), [xs, W, U, b], rng)
    return max(cell, seq)


def check_bidirectional(rng):
    xs = _t(rng, 2, 4, 3)
    Wf, Uf, bf = _t(rng, 3, 8), _t(rng, 2, 8), _t(rng, 8)
    Wb, Ub, bb = _t(rng, 3, 8), _t(rng, 2, 8), _t(rng, 8)
    Gf, Vf, cf = _t(rng, 3, 6), _t(rng, 2, 6), _t(rng, 6)
    Gb, Vb, cb = _t(rng, 3, 6), _t(rng, 2, 6), _t(rng, 6)
    p1, p2 = _projection(rng, (2, 4, 4)), _projection(rng, (2, 4, 4))

    def f(th):
        lstm = concat([lstm_sequence(xs, Wf, Uf, bf), lstm_sequence(xs, Wb, Ub, bb, reverse=True)])
        gru = concat([gru_sequence(xs, Gf, Vf, cf), gru_sequence(xs, Gb, Vb, cb, reverse=True)])
        return p1(lstm) + p2(gru)

    return _worst(f, [xs, Wf, Uf, bf, Wb, Ub, bb, Gf, Vf, cf, Gb, Vb, cb], rng)


def check_softmax_ce(rng):
    logits = _t(rng, 5, 3)
    labels = np.array([0, 2, 1, 2, 0])
    return _worst(lambda th: softmax_cross_entropy(logits, labels, [0.4, 3.0, 5.0]), [logits], rng)


def mini_spec(kind: str) -> ModelSpec:
    return ModelSpec(kind=kind, max_len=6, embed_dim=4, gru_units=3, lstm_units=3,
                     conv_filters=2, kernel_widths=(3,) if kind != "textcnn" else (2, 3))


def check_model(kind: str, rng):
    spec = mini_spec(kind)
    table = random_embedding_table(9, spec.embed_dim, make_rng(11))
    table.weights[1:] *= 5  # lift embeddings off the ±0.05 init so gradients are not tiny
    # fixed seeds chosen so that no probe crosses a max-pool argmax switch
    model = build_model(spec, table, make_rng(2)).astype(np.float64)
    for name in model.conv_names:
        # keep the ReLUs active so no probe lands on a dead unit or a kink
        getattr(model, name).bias.data[:] = 0.5
    ids = np.array([[3, 4, 5, 2, 0, 0], [8, 1, 7, 6, 5, 2], [2, 2, 3, 0, 0, 0]])
    labels = np.array([0, 1, 2])

    def f(th):
        return softmax_cross_entropy(model(ids), labels, [0.7, 1.9, 2.6])

    worst = 0.0
    for name, p in model.named_parameters():
        if name == "embedding.weight":
            # the PAD row is pinned to zero, so only the other rows are probed
            dim = p.shape[1]
            indices = np.sort(rng.choice(np.arange(dim, p.size), size=MAX_PROBES, replace=False))
            err = finite_diff_check(f, p, STEP, indices=indices)
        else:
            err = finite_diff_check(f, p, STEP, max_probes=MAX_PROBES, rng=rng)
        worst = max(worst, err)
    return worst


def check_conv_oracle(rng):
    worst = 0.0
    for _ in range(100):
        b, t, c, k, nf = (int(v) for v in rng.integers(1, 6, size=5))
        t = max(t, k)
        x = rng.normal(size=(b, t, c))
        K = rng.normal(size=(nf, k, c))
        bias = rng.normal(size=nf)
        got = conv1d(Tensor(x), Tensor(K), Tensor(bias), None).data
        want = np.zeros((b, t - k + 1, nf))
        for i in range(b):
            for s in range(t - k + 1):
                for f in range(nf):
                    want[i, s, f] = bias[f] + sum(x[i, s + j, ch] * K[f, j, ch]
                                                  for j in range(k) for ch in range(c))
        worst = max(worst, float(np.max(np.abs(got - want))))
    return worst


def check_pool_oracle(rng):
    worst = 0.0
    for _ in range(100):
        b, t, c = (int(v) for v in rng.integers(1, 6, size=3))
        x = rng.normal(size=(b, t, c))
        got = global_max_pool(Tensor(x)).data
        want = np.array([[max(x[i, s, ch] for s in range(t)) for ch in range(c)] for i in range(b)])
        worst = max(worst, float(np.max(np.abs(got - want))))
    return worst


PREPROCESS_GOLDENS = [
    ("Thương tụi mày quá không biết tụi mày có thương tao ko :(",
     "thương tụi mày quá không biết tụi mày có thương tao ko"),
    ("Thi đấu thể thao chuyên nghiệp ở trong nước bạc bẽo vl",
     "thi đấu thể thao chuyên nghiệp ở trong nước bạc bẽo vl"),
    ("Không ai rãnh mà nói chuyện với mày đâu thằng ngũ",
     "không ai rãnh mà nói chuyện với mày đâu thằng ngũ"),
    ("Có  3   con!!!", "có number con"),
    ("", ""),
]


def check_preprocess(rng):
    bad = [raw for raw, want in PREPROCESS_GOLDENS if normalize_text(raw) != want]
    return float(len(bad))


def _gradient(fn):
    return lambda rng: (fn(rng), GRAD_TOL)


CHECKS: dict[str, Callable] = {
    "embedding": _gradient(check_embedding),
    "spatial-dropout": _gradient(check_spatial_dropout),
    "conv1d": _gradient(check_conv1d),
    "global-max-pool": _gradient(check_max_pool),
    "dense": _gradient(check_dense),
    "lstm": _gradient(check_lstm),
    "gru": _gradient(check_gru),
    "bidirectional": _gradient(check_bidirectional),
    "softmax-cross-entropy": _gradient(check_softmax_ce),
    **{f"model-{kind}": _gradient(lambda rng, kind=kind: check_model(kind, rng)) for kind in KINDS},
    "conv1d-oracle": lambda rng: (check_conv_oracle(rng), ORACLE_TOL),
    "max-pool-oracle": lambda rng: (check_pool_oracle(rng), ORACLE_TOL),
    "preprocess-goldens": lambda rng: (check_preprocess(rng), 0.5),
}


def _doubled(fn):
    def wrapper(*args, **kwargs):
        return tuple(2 * g for g in fn(*args, **kwargs))
    return wrapper


_SABOTAGE_TARGETS = {
    "lstm": (R, "_lstm_step_backward"),
    "gru": (R, "_gru_step_backward"),
    "conv1d": (F.Conv1D, "backward"),
}


@contextlib.contextmanager
def sabotaged(target: str | None):
    """Temporarily double one backward rule (mutation test of the suite itself)."""
    if target is None:
        yield
        return
    owner, attr = _SABOTAGE_TARGETS[target]
    original = getattr(owner, attr)
    setattr(owner, attr, _doubled(original))
    try:
        yield
    finally:
        setattr(owner, attr, original)


def run_checks(names=None, sabotage: str | None = None, seed: int = 0) -> list[CheckResult]:
    results = []
    with sabotaged(sabotage):
        for name in names or CHECKS:
            start = time.perf_counter()
            try:
                value, tol = CHECKS[name](make_rng(seed))
                passed = bool(value < tol)
                detail = f"{value:.3e} (< {tol:g})"
            except Exception as exc:  # a crashing check is a failing check
                passed, detail = False, f"{type(exc).__name__}: {exc}"
            results.append(CheckResult(name, passed, detail, time.perf_counter() - start))
    return results


def format_results(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  result  {'value':<24} seconds"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.detail:<24} {r.seconds:.2f}")
    return "\n".join(lines)
