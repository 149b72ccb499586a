"""Central finite-difference gradient verification."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor

__all__ = ["numeric_gradient", "max_relative_error", "check_gradients"]


def numeric_gradient(fn, tensor: Tensor, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of the scalar ``fn()`` w.r.t. ``tensor``.

    ``fn`` must re-evaluate the forward pass each call (it reads
    ``tensor.data`` in place).
    """
    grad = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        f_plus = float(fn().data)
        flat[i] = orig - eps
        f_minus = float(fn().data)
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * eps)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray,
                       guard: float = 1e-3) -> float:
    """Scale-guarded relative error; `guard` keeps near-zero entries honest."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), guard)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def check_gradients(fn, tensors: dict[str, Tensor], eps: float = 1e-5,
                    guard: float = 1e-3) -> dict[str, float]:
    """Compare backprop gradients with central differences.

    Returns the max scale-guarded relative error per named tensor. ``fn``
    builds the forward graph and returns the scalar loss.
    """
    for t in tensors.values():
        t.grad = None
    loss = fn()
    loss.backward()
    errors: dict[str, float] = {}
    for name, t in tensors.items():
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad.copy()
        numeric = numeric_gradient(fn, t, eps=eps)
        errors[name] = max_relative_error(analytic, numeric, guard=guard)
    return errors
