"""Weight initialization for rectifier networks.

Every scheme draws zero-mean Gaussian weights; only the standard deviation
differs. With ``n = k*k*c`` (fan-in) and ``n_hat = k*k*d`` (fan-out):

==================  ===============================
scheme              variance of each weight
==================  ===============================
``he-fwd``          ``2 / n``
``he-bwd``          ``2 / n_hat``
``xavier``          ``1 / n``
``fixed:<s>``       ``s**2``
``prelu:<a>:fwd``   ``2 / ((1 + a**2) * n)``
``prelu:<a>:bwd``   ``2 / ((1 + a**2) * n_hat)``
==================  ===============================

The He rules keep ``0.5 * (1 + a**2) * fan * Var[w] == 1`` for each layer,
including the first one. Biases start at zero and PReLU slopes at the value
written in the spec.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model.network import slope_count
from .model.spec import Activation, Conv, Fc, NetworkSpec
from .tensor import RngStream, sample_gaussian

__all__ = [
    "HeForward",
    "HeBackward",
    "Xavier",
    "FixedStd",
    "PReluAware",
    "parse_scheme",
    "scheme_name",
    "fan_in",
    "fan_out",
    "init_variance",
    "init_std",
    "layer_std",
    "initialize_network",
]


@dataclass(frozen=True)
class HeForward:
    pass


@dataclass(frozen=True)
class HeBackward:
    pass


@dataclass(frozen=True)
class Xavier:
    pass


@dataclass(frozen=True)
class FixedStd:
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise ValueError(f"fixed std must be finite and >= 0, got {self.sigma}")


@dataclass(frozen=True)
class PReluAware:
    a: float
    direction: str = "fwd"

    def __post_init__(self):
        if not math.isfinite(self.a):
            raise ValueError(f"slope must be finite, got {self.a}")
        if self.direction not in ("fwd", "bwd"):
            raise ValueError(f"direction must be 'fwd' or 'bwd', got {self.direction!r}")


def parse_scheme(text: str):
    """Parse ``he-fwd``, ``he-bwd``, ``xavier``, ``fixed:<sigma>`` or ``prelu:<a>:<fwd|bwd>``."""
    simple = {"he-fwd": HeForward(), "he-bwd": HeBackward(), "xavier": Xavier()}
    if text in simple:
        return simple[text]
    parts = text.split(":")
    try:
        if parts[0] == "fixed" and len(parts) == 2:
            return FixedStd(float(parts[1]))
        if parts[0] == "prelu" and len(parts) == 3:
            return PReluAware(float(parts[1]), parts[2])
    except ValueError as exc:
        raise ValueError(f"bad init scheme {text!r}: {exc}") from None
    raise ValueError(
        f"unknown init scheme {text!r} (expected he-fwd, he-bwd, xavier, "
        "fixed:<sigma>, prelu:<a>:fwd or prelu:<a>:bwd)")


def scheme_name(scheme) -> str:
    if isinstance(scheme, FixedStd):
        return f"fixed:{scheme.sigma:g}"
    if isinstance(scheme, PReluAware):
        return f"prelu:{scheme.a:g}:{scheme.direction}"
    return {HeForward: "he-fwd", HeBackward: "he-bwd", Xavier: "xavier"}[type(scheme)]


def _require_weighted(layer):
    if not isinstance(layer, (Conv, Fc)):
        raise TypeError(f"fan is only defined for conv/fc layers, got {type(layer).__name__}")
    if isinstance(layer, Conv) and layer.in_channels is None or isinstance(layer, Fc) and layer.in_units is None:
        raise ValueError("layer has no resolved input size; take it from a parsed NetworkSpec")


def fan_in(layer) -> int:
    """Connections feeding one response: ``k*k*c`` (``k = 1`` for fc)."""
    _require_weighted(layer)
    if isinstance(layer, Conv):
        return layer.k * layer.k * layer.in_channels
    return layer.in_units


def fan_out(layer) -> int:
    """Responses touched by one input in backprop: ``k*k*d``."""
    _require_weighted(layer)
    if isinstance(layer, Conv):
        return layer.k * layer.k * layer.filters
    return layer.units


def init_variance(scheme, layer) -> float:
    """Weight variance the scheme prescribes for ``layer``."""
    if isinstance(scheme, HeForward):
        return 2.0 / fan_in(layer)
    if isinstance(scheme, HeBackward):
        return 2.0 / fan_out(layer)
    if isinstance(scheme, Xavier):
        return 1.0 / fan_in(layer)
    if isinstance(scheme, FixedStd):
        _require_weighted(layer)
        return scheme.sigma ** 2
    if isinstance(scheme, PReluAware):
        fan = fan_in(layer) if scheme.direction == "fwd" else fan_out(layer)
        return 2.0 / ((1.0 + scheme.a ** 2) * fan)
    raise TypeError(f"unknown init scheme {scheme!r}")


def init_std(scheme, layer) -> float:
    if isinstance(scheme, FixedStd):
        _require_weighted(layer)
        return scheme.sigma
    return math.sqrt(init_variance(scheme, layer))


def layer_std(scheme, layer) -> float:
    """Like :func:`init_std` but honours a ``std`` pinned in the spec file."""
    return layer.std if layer.std is not None else init_std(scheme, layer)


def layer_variance(scheme, layer) -> float:
    return layer.std ** 2 if layer.std is not None else init_variance(scheme, layer)


def initialize_network(spec: NetworkSpec, scheme, seed: int) -> dict:
    """Fresh parameters for ``spec``.

    Weights are drawn layer by layer, in spec order, from one
    :class:`~rectinit.tensor.RngStream` seeded with ``seed``. Conv weights have
    shape ``[d, c, k, k]``, fc weights ``[d, n]``.
    """
    rng = RngStream(seed)
    params = {}
    for i, layer in enumerate(spec.layers):
        if isinstance(layer, Conv):
            shape = (layer.filters, layer.in_channels, layer.k, layer.k)
        elif isinstance(layer, Fc):
            shape = (layer.units, layer.in_units)
        elif isinstance(layer, Activation) and layer.parametric:
            params[f"{i}.slopes"] = np.full(slope_count(spec, i), float(layer.a))
            continue
        else:
            continue
        params[f"{i}.W"] = sample_gaussian(shape, 0.0, layer_std(scheme, layer), rng)
        params[f"{i}.b"] = np.zeros(shape[0])
    return params
