"""Central finite-difference gradient checker (use with float64 inputs)."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def numerical_grad(fn: Callable[[], Tensor], wrt: Tensor, h: float = 1e-6) -> np.ndarray:
    grad = np.zeros_like(wrt.data)
    flat = wrt.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(fn().data)
        flat[i] = orig - h
        fm = float(fn().data)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * h)
    return grad


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """Max over entries of |a - n| / max(|a|, |n|, floor) -- norm-relative for tiny entries."""
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0), floor)
    return float(np.abs(analytic - numeric).max(initial=0.0) / scale)


def check_gradients(fn: Callable[[], Tensor], inputs: Sequence[Tensor], h: float = 1e-6) -> float:
    """Worst |backprop - finite difference| relative to the largest gradient entry.

    The scale is taken over all ``inputs`` jointly: some parameters have an
    identically zero gradient (e.g. a key bias under softmax shift
    invariance) where a per-tensor ratio would only measure rounding noise.
    """
    for t in inputs:
        t.grad = None
    fn().backward()
    diffs, scale = 0.0, 1e-8
    for t in inputs:
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        numeric = numerical_grad(fn, t, h)
        diffs = max(diffs, float(np.abs(analytic - numeric).max(initial=0.0)))
        scale = max(scale, float(np.abs(analytic).max(initial=0.0)), float(np.abs(numeric).max(initial=0.0)))
    return diffs / scale
