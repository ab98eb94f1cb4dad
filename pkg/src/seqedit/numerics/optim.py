"""Adam with linear learning-rate warmup."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import Parameter


def warmup_lr(step: int, base_lr: float, warmup_steps: int) -> float:
    """``base_lr * min(1, step / warmup_steps)``; step counts from 1."""
    if step < 1:
        raise ValueError(f"step must be >= 1, got {step}")
    if warmup_steps <= 0:
        return base_lr
    return base_lr * min(1.0, step / warmup_steps)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray


@dataclass
class Adam:
    params: list[Parameter]
    base_lr: float = 5e-5
    warmup_steps: int = 2000
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    step_count: int = 0
    state: list[AdamState] = field(default_factory=list)

    def __post_init__(self):
        if not self.state:
            self.state = [AdamState(np.zeros_like(p.data), np.zeros_like(p.data)) for p in self.params]

    @property
    def lr(self) -> float:
        return warmup_lr(max(self.step_count, 1), self.base_lr, self.warmup_steps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> float:
        """Apply one update from the params' accumulated grads; returns the lr used."""
        for p in self.params:
            if p.grad is not None and not np.all(np.isfinite(p.grad)):
                raise FloatingPointError("non-finite gradient")
        self.step_count += 1
        t = self.step_count
        lr = warmup_lr(t, self.base_lr, self.warmup_steps)
        b1, b2 = self.betas
        c1 = 1.0 - b1**t
        c2 = 1.0 - b2**t
        for p, st in zip(self.params, self.state):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            st.m *= b1
            st.m += (1.0 - b1) * g
            st.v *= b2
            st.v += (1.0 - b2) * (g * g)
            update = lr * (st.m / c1) / (np.sqrt(st.v / c2) + self.eps)
            p.data = (p.data - update).astype(p.data.dtype)
        return lr
