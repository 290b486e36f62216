from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, **hyper) -> "AdamState":
        state = cls(**hyper)
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
        return state

    def copy(self) -> "AdamState":
        return AdamState(self.learning_rate, self.beta1, self.beta2, self.epsilon,
                         self.step_count, [a.copy() for a in self.m], [a.copy() for a in self.v])


def adam_step(params, grads, state: AdamState) -> None:
    """Apply one Adam update in place to ``params`` and ``state``."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise DimensionError("parameter, gradient and moment lists differ in length")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    correct1 = 1.0 - b1 ** t
    correct2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise DimensionError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.learning_rate * (m / correct1) / (np.sqrt(v / correct2) + state.epsilon)
