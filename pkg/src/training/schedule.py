"""Step-decay learning-rate schedule."""

from __future__ import annotations

from src.core.errors import ConfigurationError


def lr_schedule(
    epoch: int,
    base_lr: float = 1e-3,
    decay_start: int = 140,
    decay_every: int = 20,
    decay_factor: float = 0.1,
) -> float:
    """
    ``base_lr`` before ``decay_start``; multiplied by ``decay_factor`` at ``decay_start`` and again
    every ``decay_every`` epochs after it.

    Examples:
        epoch 0 -> 1e-3, epoch 150 -> 1e-4, epoch 185 -> 1e-6
    """
    if epoch < 0:
        raise ConfigurationError(f"epoch must be >= 0, got {epoch}")
    if decay_every < 1:
        raise ConfigurationError(f"decay interval must be >= 1, got {decay_every}")
    if epoch < decay_start:
        return base_lr
    n_decays = 1 + (epoch - decay_start) // decay_every
    return base_lr * decay_factor ** n_decays
