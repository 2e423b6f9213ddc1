"""Adam with a reduce-on-plateau learning rate.

Matches the training recipe used throughout the package: lr 5e-3,
betas (0.9, 0.999), eps 1e-8, and the learning rate halves whenever the
best loss seen so far has not improved for 200 consecutive epochs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericsError


@dataclass
class AdamState:
    lr: float = 5e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 200
    factor: float = 0.5
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    best_loss: float = math.inf
    stale_epochs: int = 0

    def _ensure(self, params: list[np.ndarray]) -> None:
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState) -> None:
    """One Adam update, in place.

    Rejects non-finite gradients by raising :class:`NumericsError` before
    touching the parameters or the moment estimates.
    """
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise NumericsError("non-finite gradient passed to adam_step")
    state._ensure(params)
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def note_loss(state: AdamState, loss: float) -> bool:
    """Track the plateau criterion; returns True when the lr was halved."""
    if loss < state.best_loss:
        state.best_loss = loss
        state.stale_epochs = 0
        return False
    state.stale_epochs += 1
    if state.stale_epochs >= state.patience:
        state.lr *= state.factor
        state.stale_epochs = 0
        return True
    return False
