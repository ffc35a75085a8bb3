"""Forward and backward passes for individual layers.

Activations are batched: axis 0 is the example index and axis 1 the channel
(or unit) index. Conv inputs are ``[N, C, H, W]``, conv weights ``[D, C, K, K]``
and fc weights ``[D, n]`` (one filter per row, ``n`` = flattened input size).
"""

from __future__ import annotations

import numpy as np

from ..tensor import RngStream, ShapeError
from .spec import Activation, Conv, Dropout, Fc, Input, MaxPool, SoftmaxXent, conv_output_size

__all__ = [
    "prelu_forward",
    "prelu_backward",
    "conv_forward",
    "conv_backward",
    "layer_forward",
    "layer_backward",
    "softmax_xent",
]


def _channel_axis(y: np.ndarray) -> int:
    return 1 if y.ndim >= 2 else 0


def _broadcast_slopes(y: np.ndarray, slopes: np.ndarray, shared: bool) -> np.ndarray:
    slopes = np.asarray(slopes, dtype=np.float64)
    if shared:
        if slopes.shape != (1,):
            raise ShapeError(f"shared PReLU expects 1 slope, got shape {slopes.shape}")
        return slopes[0]
    axis = _channel_axis(y)
    if slopes.ndim != 1 or slopes.shape[0] != y.shape[axis]:
        raise ShapeError(f"expected {y.shape[axis]} channel slopes, got shape {slopes.shape}")
    shape = [1] * y.ndim
    shape[axis] = -1
    return slopes.reshape(shape)


def prelu_forward(y: np.ndarray, slopes: np.ndarray, shared: bool = False) -> np.ndarray:
    """``max(0, y) + a * min(0, y)`` with ``a`` picked per channel (or shared)."""
    a = _broadcast_slopes(y, slopes, shared)
    return np.maximum(y, 0.0) + a * np.minimum(y, 0.0)


def prelu_backward(y, slopes, shared, upstream):
    """Gradients of PReLU with respect to its input and its slopes.

    The negative branch (``y <= 0``) owns the boundary, so positions with
    ``y == 0`` receive ``a * upstream`` and contribute ``y = 0`` to the slope
    gradient. Slope gradients are summed over every non-channel axis; the
    shared variant then sums the per-channel totals in channel order.

    Returns
    -------
    grad_y : numpy.ndarray
    grad_slopes : numpy.ndarray
        Same length as ``slopes``.
    """
    if upstream.shape != y.shape:
        raise ShapeError(f"upstream shape {upstream.shape} != input shape {y.shape}")
    a = _broadcast_slopes(y, slopes, shared)
    neg = y <= 0
    grad_y = np.where(neg, a * upstream, upstream)
    contrib = np.where(neg, upstream * y, 0.0)
    axis = _channel_axis(y)
    other = tuple(i for i in range(y.ndim) if i != axis)
    per_channel = contrib.sum(axis=other) if other else contrib
    if shared:
        return grad_y, np.array([per_channel.sum()])
    return grad_y, per_channel


def _pad(x: np.ndarray, layer: Conv) -> tuple[np.ndarray, int, int]:
    h, w = x.shape[2:]
    ho, pt, pb = conv_output_size(h, layer.k, layer.stride, layer.padding)
    wo, pl, pr = conv_output_size(w, layer.k, layer.stride, layer.padding)
    if pt or pb or pl or pr:
        x = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    return x, ho, wo


def _window(xp, ki, kj, stride, ho, wo):
    return xp[:, :, ki:ki + stride * (ho - 1) + 1:stride, kj:kj + stride * (wo - 1) + 1:stride]


def conv_forward(x: np.ndarray, W: np.ndarray, b: np.ndarray, layer: Conv):
    """Direct convolution (cross-correlation, as in most CNN code).

    Each output accumulates its ``k*k*c`` products in the fixed order
    channel, kernel row, kernel column, starting from 0.0, and the bias is
    added last. This order is deliberate: results are bit-reproducible and
    match a naive nested-loop reference exactly.
    """
    xp, ho, wo = _pad(x, layer)
    n, c = x.shape[:2]
    out = np.zeros((n, W.shape[0], ho, wo))
    for ci in range(c):
        for ki in range(layer.k):
            for kj in range(layer.k):
                patch = _window(xp[:, ci:ci + 1], ki, kj, layer.stride, ho, wo)
                out += W[None, :, ci, ki, kj, None, None] * patch
    out += b[None, :, None, None]
    return out, xp


def conv_backward(xp: np.ndarray, x_shape, W: np.ndarray, layer: Conv, upstream: np.ndarray):
    """Input, weight and bias gradients of :func:`conv_forward`.

    The input gradient scatters ``W^T`` applied to the upstream gradient
    back through every kernel tap, i.e. the rearranged-filter product.
    """
    ho, wo = upstream.shape[2:]
    s = layer.stride
    gxp = np.zeros_like(xp)
    gW = np.zeros_like(W)
    for ki in range(layer.k):
        for kj in range(layer.k):
            patch = _window(xp, ki, kj, s, ho, wo)
            gW[:, :, ki, kj] = np.tensordot(upstream, patch, axes=([0, 2, 3], [0, 2, 3]))
            contrib = np.tensordot(upstream, W[:, :, ki, kj], axes=([1], [0]))  # [N, Ho, Wo, C]
            gxp[:, :, ki:ki + s * (ho - 1) + 1:s, kj:kj + s * (wo - 1) + 1:s] += contrib.transpose(0, 3, 1, 2)
    h, w = x_shape[2:]
    _, pt, _ = conv_output_size(h, layer.k, layer.stride, layer.padding)
    _, pl, _ = conv_output_size(w, layer.k, layer.stride, layer.padding)
    gx = gxp[:, :, pt:pt + h, pl:pl + w]
    return np.ascontiguousarray(gx), gW, upstream.sum(axis=(0, 2, 3))


def _maxpool_forward(x, layer: MaxPool):
    k, s = layer.k, layer.stride
    ho = (x.shape[2] - k) // s + 1
    wo = (x.shape[3] - k) // s + 1
    out = np.full(x.shape[:2] + (ho, wo), -np.inf)
    arg = np.zeros(out.shape, dtype=np.intp)
    for ki in range(k):
        for kj in range(k):
            patch = _window(x, ki, kj, s, ho, wo)
            better = patch > out  # strict: first maximum in row-major window order wins
            out = np.where(better, patch, out)
            arg = np.where(better, ki * k + kj, arg)
    return out, arg


def _maxpool_backward(x_shape, arg, layer: MaxPool, upstream):
    k, s = layer.k, layer.stride
    ho, wo = upstream.shape[2:]
    gx = np.zeros(x_shape)
    for ki in range(k):
        for kj in range(k):
            routed = np.where(arg == ki * k + kj, upstream, 0.0)
            gx[:, :, ki:ki + s * (ho - 1) + 1:s, kj:kj + s * (wo - 1) + 1:s] += routed
    return gx


def layer_forward(layer, params: dict, x: np.ndarray, mode: str = "eval", rng: RngStream | None = None):
    """Run one layer.

    Parameters
    ----------
    layer : layer spec object
    params : dict
        ``{"W", "b"}`` for conv/fc, ``{"slopes"}`` for PReLU, else empty.
    x : numpy.ndarray
        Batched input.
    mode : {"train", "eval"}
        Only dropout looks at it.
    rng : RngStream, optional
        Required for dropout with a positive rate in train mode.

    Returns
    -------
    output, cache
        ``cache`` is whatever :func:`layer_backward` needs.
    """
    if isinstance(layer, Conv):
        if x.ndim != 4 or x.shape[1] != params["W"].shape[1]:
            raise ShapeError(f"conv expects [N, {params['W'].shape[1]}, H, W] input, got {x.shape}")
        out, xp = conv_forward(x, params["W"], params["b"], layer)
        return out, (xp, x.shape)
    if isinstance(layer, Fc):
        flat = x.reshape(x.shape[0], -1)
        if flat.shape[1] != params["W"].shape[1]:
            raise ShapeError(f"fc expects {params['W'].shape[1]} inputs, got {flat.shape[1]}")
        return flat @ params["W"].T + params["b"], (flat, x.shape)
    if isinstance(layer, MaxPool):
        if x.ndim != 4:
            raise ShapeError(f"maxpool expects [N, C, H, W] input, got {x.shape}")
        out, arg = _maxpool_forward(x, layer)
        return out, (x.shape, arg)
    if isinstance(layer, Activation):
        kind = layer.kind
        if kind == "identity":
            return x, None
        if kind == "relu":
            return np.maximum(x, 0.0), x
        if kind == "lrelu":
            return prelu_forward(x, np.array([layer.a]), shared=True), x
        return prelu_forward(x, params["slopes"], shared=kind == "prelu_shared"), x
    if isinstance(layer, Dropout):
        if mode == "eval" or layer.rate == 0:
            return x, None
        if rng is None:
            raise ValueError("dropout in train mode needs an RngStream")
        keep = (rng.uniform(x.shape) >= layer.rate) / (1.0 - layer.rate)
        return x * keep, keep
    if isinstance(layer, (Input, SoftmaxXent)):
        return x, None
    raise TypeError(f"unknown layer {layer!r}")


def layer_backward(layer, params: dict, cache, upstream: np.ndarray):
    """Backpropagate ``upstream`` through one layer.

    Returns ``(grad_input, grad_params)`` where ``grad_params`` uses the same
    keys as ``params``.
    """
    if isinstance(layer, Conv):
        xp, x_shape = cache
        gx, gW, gb = conv_backward(xp, x_shape, params["W"], layer, upstream)
        return gx, {"W": gW, "b": gb}
    if isinstance(layer, Fc):
        flat, x_shape = cache
        if upstream.shape != (flat.shape[0], params["W"].shape[0]):
            raise ShapeError(f"fc upstream shape {upstream.shape} does not match output")
        return (upstream @ params["W"]).reshape(x_shape), {"W": upstream.T @ flat, "b": upstream.sum(axis=0)}
    if isinstance(layer, MaxPool):
        x_shape, arg = cache
        return _maxpool_backward(x_shape, arg, layer, upstream), {}
    if isinstance(layer, Activation):
        kind = layer.kind
        if kind == "identity":
            return upstream, {}
        y = cache
        if upstream.shape != y.shape:
            raise ShapeError(f"upstream shape {upstream.shape} != activation input {y.shape}")
        if kind == "relu":
            return np.where(y > 0, upstream, 0.0), {}
        if kind == "lrelu":
            return np.where(y > 0, upstream, layer.a * upstream), {}
        gy, ga = prelu_backward(y, params["slopes"], kind == "prelu_shared", upstream)
        return gy, {"slopes": ga}
    if isinstance(layer, Dropout):
        return (upstream if cache is None else upstream * cache), {}
    if isinstance(layer, (Input, SoftmaxXent)):
        return upstream, {}
    raise TypeError(f"unknown layer {layer!r}")


def softmax_xent(logits: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Mean cross-entropy of ``softmax(logits)`` and its gradient.

    Logits are shifted by their row maximum before exponentiation, so large
    inputs do not overflow.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.intp)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(f"logits {logits.shape} and labels {labels.shape} disagree")
    b, k = logits.shape
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"labels must lie in [0, {k})")
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - log_norm
    rows = np.arange(b)
    loss = float(-logp[rows, labels].mean())
    grad = np.exp(logp)
    grad[rows, labels] -= 1.0
    return loss, grad / b
