"""Central-difference gradient oracle."""
from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from ..errors import ContractError, OracleMisuseError
from .tensor import Tensor, backward


def _evaluate(f, theta) -> float:
    out = f(theta)
    value = out.data if isinstance(out, Tensor) else np.asarray(out)
    if value.size != 1:
        raise ContractError(f"gradient check needs a scalar function, got shape {value.shape}")
    return float(value.reshape(-1)[0])


def numerical_gradient(f: Callable[[Tensor], Tensor], theta: Tensor, h: float = 1e-3,
                       indices: Iterable[int] | None = None) -> dict[int, float]:
    """Central differences ``(f(θ+h·e) - f(θ-h·e)) / 2h`` at the given flat indices."""
    flat = theta.data.reshape(-1)
    idx = range(flat.size) if indices is None else indices
    out = {}
    for i in idx:
        orig = flat[i]
        flat[i] = orig + h
        plus = _evaluate(f, theta)
        flat[i] = orig - h
        minus = _evaluate(f, theta)
        flat[i] = orig
        out[int(i)] = (plus - minus) / (2 * h)
    return out


def analytic_gradient(f: Callable[[Tensor], Tensor], theta: Tensor) -> np.ndarray:
    theta.grad = None
    out = f(theta)
    backward(out)
    grad = np.zeros_like(theta.data) if theta.grad is None else theta.grad.copy()
    theta.grad = None
    return grad


def finite_diff_check(f: Callable[[Tensor], Tensor], theta: Tensor, h: float = 1e-3,
                      indices: Iterable[int] | None = None, max_probes: int | None = None,
                      rng: np.random.Generator | None = None,
                      analytic: np.ndarray | None = None) -> float:
    """Compare backprop gradients of ``f`` at ``theta`` with central differences.

    ``f`` maps ``theta`` (mutated in place between calls) to a scalar tensor.
    Returns ``max |a - n| / max(|a|, |n|, 1e-8)`` over the probed coordinates.
    Pass ``analytic`` to check a gradient computed elsewhere, for example a
    deliberately corrupted one.

    Run in float64: central differences in float32 are too noisy to resolve
    errors near 1e-4.
    """
    if h <= 0:
        raise ContractError(f"step size must be positive, got {h}")
    if not theta.requires_grad:
        raise ContractError("theta must require grad")
    first, second = _evaluate(f, theta), _evaluate(f, theta)
    if first != second:
        raise OracleMisuseError(
            f"f is not deterministic ({first!r} != {second!r}); disable dropout before checking")
    if analytic is None:
        analytic = analytic_gradient(f, theta)
    n = theta.data.size
    if indices is None:
        indices = np.arange(n)
        if max_probes is not None and n > max_probes:
            rng = rng if rng is not None else np.random.default_rng(0)
            indices = np.sort(rng.choice(n, size=max_probes, replace=False))
    numeric = numerical_gradient(f, theta, h, indices)
    flat_a = np.asarray(analytic, dtype=np.float64).reshape(-1)
    worst = 0.0
    for i, num in numeric.items():
        a = flat_a[i]
        err = abs(a - num) / max(abs(a), abs(num), 1e-8)
        worst = max(worst, err)
    return worst
