"""ADAM optimizer with bias-corrected moments."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Tuple

import numpy as np

from src.core.errors import DimensionError, GradientError
from src.tensor.layers import Parameter


@dataclass
class AdamState:
    """Step counter and per-parameter moment buffers."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Mapping[str, Parameter],
    grads: Mapping[str, Optional[np.ndarray]],
    state: AdamState,
) -> AdamState:
    """
    Apply one ADAM update in place to ``params`` and advance ``state``.

    Parameters without a gradient are treated as having a zero gradient. Every gradient is
    validated before any parameter moves.

    Raises:
        GradientError: a gradient holds NaN/Inf (the parameter is named)
        DimensionError: a gradient or moment buffer does not match its parameter
    """
    if state.step < 0:
        raise GradientError(f"invalid ADAM step counter {state.step}")
    for name, param in params.items():
        grad = grads.get(name)
        if grad is None:
            continue
        if grad.shape != param.shape:
            raise DimensionError(f"gradient for '{name}' has shape {grad.shape}, parameter has {param.shape}")
        if not np.all(np.isfinite(grad)):
            raise GradientError(f"non-finite gradient for parameter '{name}'")

    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    for name, param in params.items():
        grad = grads.get(name)
        if grad is None:
            grad = np.zeros_like(param.data)
        m = state.first_moment.setdefault(name, np.zeros_like(param.data))
        v = state.second_moment.setdefault(name, np.zeros_like(param.data))
        if m.shape != param.shape or v.shape != param.shape:
            raise DimensionError(f"moment buffers for '{name}' do not match parameter shape {param.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad
        m_hat = m / correction1
        v_hat = v / correction2
        param.data -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return state


class Adam:
    """Stateful wrapper around ``adam_step`` over a fixed set of named parameters."""

    def __init__(
        self,
        named_params: Iterable[Tuple[str, Parameter]],
        learning_rate: float = 1e-3,
        betas: Tuple[float, float] = (0.9, 0.999),
        epsilon: float = 1e-8,
    ):
        self.params: Dict[str, Parameter] = dict(named_params)
        self.state = AdamState(learning_rate=learning_rate, beta1=betas[0], beta2=betas[1], epsilon=epsilon)

    @property
    def learning_rate(self) -> float:
        return self.state.learning_rate

    def set_learning_rate(self, learning_rate: float) -> None:
        self.state.learning_rate = learning_rate

    def zero_grad(self) -> None:
        for param in self.params.values():
            param.zero_grad()

    def step(self) -> None:
        grads = {name: param.grad for name, param in self.params.items()}
        adam_step(self.params, grads, self.state)
