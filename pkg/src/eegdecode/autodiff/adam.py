"""Adam with bias correction.

Defaults follow the usual convention (beta1=0.9, beta2=0.999, eps=1e-8);
the learning rate default of 0.005 is the pipeline-wide training setting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    """Per-parameter moment accumulators plus the shared step counter."""
    learning_rate: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: dict, learning_rate: float = 0.005,
                   beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        state = cls(learning_rate, beta1, beta2, eps)
        for name, p in params.items():
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        return state


def adam_step(params: dict, grads: dict, state: AdamState) -> None:
    """One bias-corrected update, in place on ``params``.

    ``grads`` maps the same names to same-shape arrays; names missing from
    ``grads`` are skipped (frozen parameters).
    """
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, g in grads.items():
        p = params[name]
        m, v = state.m[name], state.v[name]
        if g.shape != m.shape:
            raise ValueError(f"gradient shape {g.shape} does not match optimizer state {m.shape} for '{name}'")
        m += (1.0 - b1) * (g - m)
        v += (1.0 - b2) * (g * g - v)
        m_hat = m / c1
        v_hat = v / c2
        p.data -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)


class Adam:
    """Convenience wrapper driving :func:`adam_step` from tensor ``.grad``s."""

    def __init__(self, params: dict, learning_rate: float = 0.005,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.state = AdamState.for_params(params, learning_rate, beta1, beta2, eps)

    def step(self):
        grads = {name: p.grad for name, p in self.params.items() if p.grad is not None}
        adam_step(self.params, grads, self.state)

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()


__all__ = ["AdamState", "adam_step", "Adam"]
