"""SGD with momentum.

Weights and biases get coupled L2 weight decay; PReLU slopes never do::

    v := momentum * v + lr * (g + weight_decay * w)     # weights, biases
    v := momentum * v + lr * g                          # slopes
    p := p - v
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import ShapeError

__all__ = ["OptimConfig", "OptState", "is_slope", "sgd_step", "parse_lr_steps"]


def is_slope(key: str) -> bool:
    return key.endswith(".slopes")


@dataclass
class OptimConfig:
    """Optimizer settings.

    ``lr_schedule`` lists ``(epoch, lr)`` switch points: from the start of that
    (1-based) epoch on, ``lr`` is used. Before the first switch point the base
    ``learning_rate`` applies.
    """

    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 0.0005
    lr_schedule: list = field(default_factory=list)

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError(f"learning rate must be >= 0, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if not self.weight_decay >= 0:
            raise ValueError(f"weight decay must be >= 0, got {self.weight_decay}")
        self.lr_schedule = sorted((int(e), float(lr)) for e, lr in self.lr_schedule)

    def lr_at(self, epoch: int) -> float:
        lr = self.learning_rate
        for start, value in self.lr_schedule:
            if epoch >= start:
                lr = value
        return lr


def parse_lr_steps(text: str) -> list[tuple[int, float]]:
    """``"10:0.001,20:0.0001"`` -> ``[(10, 0.001), (20, 0.0001)]``."""
    steps = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        epoch, _, lr = item.partition(":")
        if not lr:
            raise ValueError(f"lr step {item!r} is not epoch:lr")
        steps.append((int(epoch), float(lr)))
    return steps


class OptState:
    """Velocity buffers, created lazily at zero for each parameter key."""

    def __init__(self):
        self.velocity: dict[str, np.ndarray] = {}

    def get(self, key: str, like: np.ndarray) -> np.ndarray:
        v = self.velocity.get(key)
        if v is None:
            v = self.velocity[key] = np.zeros_like(like)
        return v


def sgd_step(params: dict, grads: dict, state: OptState, config: OptimConfig,
             lr: float | None = None, frozen=()) -> tuple[dict, OptState]:
    """Apply one momentum step in place and return ``(params, state)``.

    Keys missing from ``grads`` count as zero gradients. Keys in ``frozen`` are
    left untouched.
    """
    lr = config.learning_rate if lr is None else lr
    mu, wd = config.momentum, config.weight_decay
    for key, p in params.items():
        if key in frozen:
            continue
        g = grads.get(key)
        if g is None:
            g = np.zeros_like(p)
        elif g.shape != p.shape:
            raise ShapeError(f"gradient for {key} has shape {g.shape}, parameter has {p.shape}")
        v = state.get(key, p)
        if is_slope(key) or wd == 0:
            v *= mu
            v += lr * g
        else:
            v *= mu
            v += lr * (g + wd * p)
        p -= v
    return params, state
