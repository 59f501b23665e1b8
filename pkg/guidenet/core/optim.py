from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from guidenet.core.errors import ContractError
from guidenet.core.tensor import Tensor


@dataclass
class OptimizerState:
    learning_rate: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    step: int = 0
    first_moments: list[np.ndarray] = field(default_factory=list)
    second_moments: list[np.ndarray] = field(default_factory=list)


def adam_step(params: Sequence[Tensor], grads: Sequence[Optional[np.ndarray]], state: OptimizerState) -> None:
    """One bias-corrected Adam update, in place. ``None`` grads leave their parameter alone."""
    if state.learning_rate <= 0:
        raise ContractError(f"learning rate must be > 0, got {state.learning_rate}")
    if len(params) != len(grads):
        raise ContractError(f"{len(params)} params but {len(grads)} grads")
    if not state.first_moments:
        state.first_moments = [np.zeros_like(p.data) for p in params]
        state.second_moments = [np.zeros_like(p.data) for p in params]
    elif len(state.first_moments) != len(params):
        raise ContractError("optimizer state was built for a different parameter list")

    state.step += 1
    beta1, beta2 = state.betas
    correction1 = 1 - beta1 ** state.step
    correction2 = 1 - beta2 ** state.step

    for p, g, m, v in zip(params, grads, state.first_moments, state.second_moments):
        if g is None:
            continue
        if g.shape != p.shape or m.shape != p.shape:
            raise ContractError(f"gradient shape {g.shape} does not match parameter {p.name or ''} {p.shape}")
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g * g
        p.data -= state.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + state.eps)


class Adam:
    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.state = OptimizerState(learning_rate=lr, betas=tuple(betas), eps=eps)

    def step(self) -> None:
        adam_step(self.params, [p.grad for p in self.params], self.state)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()
