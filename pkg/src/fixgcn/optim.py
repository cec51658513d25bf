"""Adam with L2 weight decay, and Glorot-uniform parameter initialization.

Weight decay is folded into the gradient (g <- g + wd * param) before the
moment updates, matching the convention common to reference GCN training
loops; it is not the decoupled variant that applies decay after the
adaptive step.
"""

from __future__ import annotations

import numpy as np

from .autodiff import RngLike, as_rng


class AdamState:
    """Per-parameter moments and the shared step counter."""

    def __init__(self, params: dict[str, np.ndarray], lr: float = 1e-2,
                 weight_decay: float = 5e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.lr = float(lr)
        self.weight_decay = float(weight_decay)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState) -> dict[str, np.ndarray]:
    """One bias-corrected Adam update, in place; returns ``params``."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** state.t
    bias2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(
                f"gradient shape {g.shape} does not match parameter "
                f"{name} of shape {p.shape}")
        if state.weight_decay:
            g = g + state.weight_decay * p
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / bias1
        v_hat = v / bias2
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


def glorot_init(rows: int, cols: int, rng: RngLike) -> np.ndarray:
    """Uniform on [-a, a] with a = sqrt(6 / (rows + cols))."""
    if rows <= 0 or cols <= 0:
        raise ValueError(f"initializer needs positive dims, got {rows}x{cols}")
    a = np.sqrt(6.0 / (rows + cols))
    return as_rng(rng).uniform(-a, a, size=(rows, cols))
