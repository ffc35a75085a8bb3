"""Whole-network forward/backward over a :class:`NetworkSpec`.

Parameters live in a flat dict keyed ``"<layer index>.<name>"`` where the
name is ``W``, ``b`` or ``slopes``, e.g. ``"1.W"`` for the first conv/fc
after the input line. Gradients use the same keys.
"""

from __future__ import annotations

import numpy as np

from ..tensor import RngStream, check_finite
from .layers import layer_backward, layer_forward, softmax_xent
from .spec import Activation, NetworkSpec

__all__ = [
    "layer_params",
    "slope_count",
    "forward",
    "loss_and_grads",
    "count_extra_slope_params",
]


def layer_params(params: dict, index: int) -> dict:
    prefix = f"{index}."
    return {k[len(prefix):]: v for k, v in params.items() if k.startswith(prefix)}


def slope_count(spec: NetworkSpec, index: int, shared: bool | None = None) -> int:
    """Number of PReLU slopes owned by the activation at ``index``."""
    layer = spec.layers[index]
    if shared is None:
        shared = layer.kind == "prelu_shared"
    return 1 if shared else spec.shapes[index][0]


def forward(spec: NetworkSpec, params: dict, x: np.ndarray, mode: str = "eval",
            rng: RngStream | None = None, keep_caches: bool = False):
    """Compute logits for a batch; optionally keep per-layer caches for backprop."""
    caches = []
    h = x
    for i, layer in enumerate(spec.layers):
        h, cache = layer_forward(layer, layer_params(params, i), h, mode, rng)
        if keep_caches:
            caches.append(cache)
    check_finite(h, "logits")
    return (h, caches) if keep_caches else h


def loss_and_grads(spec: NetworkSpec, params: dict, x: np.ndarray, labels,
                   mode: str = "train", rng: RngStream | None = None):
    """Mean softmax cross-entropy of a batch and the gradient of every parameter.

    Returns
    -------
    loss : float
    grads : dict
        Keyed like ``params``.
    logits : numpy.ndarray
    """
    logits, caches = forward(spec, params, x, mode, rng, keep_caches=True)
    loss, g = softmax_xent(logits, labels)
    grads = {}
    for i in range(len(spec.layers) - 1, 0, -1):
        g, gp = layer_backward(spec.layers[i], layer_params(params, i), caches[i], g)
        for name, value in gp.items():
            grads[f"{i}.{name}"] = value
    return loss, grads, logits


def count_extra_slope_params(spec: NetworkSpec, mode: str | None = None) -> int:
    """Count learnable PReLU slopes.

    ``mode`` of ``"shared"`` or ``"channel-wise"`` overrides the variant written
    in the spec; ``None`` honours each layer's own kind. ReLU, LReLU and
    identity activations contribute nothing.
    """
    if mode not in (None, "shared", "channel-wise"):
        raise ValueError(f"mode must be 'shared' or 'channel-wise', got {mode!r}")
    total = 0
    for i in spec.activation_indices:
        layer: Activation = spec.layers[i]
        if layer.parametric:
            total += slope_count(spec, i, None if mode is None else mode == "shared")
    return total
