"""Variance propagation through rectifier networks at initialization.

Analytic side: each weighted layer ``l`` scales the forward signal variance by

    gain_fwd[l] = 0.5 * (1 + a**2) * fan_in[l]  * Var[w_l]

and the backward gradient variance by

    gain_bwd[l] = 0.5 * (1 + a**2) * fan_out[l] * Var[w_l]

where ``a`` is the negative slope of the rectifier (0 for ReLU, 1 for a
linear unit). Cumulative products start at layer 2: the first layer's factor
is a constant offset, not an exponential trend. Pooling and dropout are
treated as gain 1.

Empirical side: :func:`monte_carlo_probe` pushes Gaussian noise through
freshly initialized networks and measures the same ratios.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .init import HeBackward, HeForward, fan_in, fan_out, init_variance, initialize_network, layer_std, layer_variance
from .model.layers import layer_backward, layer_forward
from .model.network import layer_params
from .model.spec import Activation, Conv, Fc, NetworkSpec
from .tensor import moments

__all__ = [
    "LayerVariance",
    "VarianceReport",
    "predict_gains",
    "attenuation_vs_he",
    "monte_carlo_probe",
    "decay_ratios",
    "stall_diagnostic",
    "REFERENCE_DECAY",
]

CSV_COLUMNS = ["layer_index", "layer_kind", "fan_in", "fan_out", "std",
               "gain_fwd", "gain_bwd", "cum_fwd", "cum_bwd"]
EMPIRICAL_COLUMNS = ["emp_fwd", "emp_bwd", "trials"]

# Decay scale used by the stall test when the run itself has no weight decay.
REFERENCE_DECAY = 0.0005


@dataclass
class LayerVariance:
    layer_index: int  # 1-based among weighted layers
    spec_index: int
    layer_kind: str
    fan_in: int
    fan_out: int
    std: float
    gain_fwd: float
    gain_bwd: float
    cum_fwd: float = 1.0
    cum_bwd: float = 1.0
    emp_fwd: float = math.nan
    emp_bwd: float = math.nan


@dataclass
class VarianceReport:
    layers: list[LayerVariance]
    trials: int = 0
    empirical_cum_fwd: float = math.nan
    empirical_cum_bwd: float = math.nan
    notes: list[str] = field(default_factory=list)

    @property
    def forward_product(self) -> float:
        """Product of forward gains over layers 2..L."""
        return self.layers[-1].cum_fwd

    @property
    def backward_product(self) -> float:
        """Product of backward gains over layers 2..L."""
        return self.layers[0].cum_bwd

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(row, name) for row in self.layers])

    def to_csv(self, header: Mapping[str, object] | None = None) -> str:
        """CSV text; ``header`` items become leading ``# key=value`` lines."""
        buf = io.StringIO()
        for key, value in (header or {}).items():
            buf.write(f"# {key}={value}\n")
        for note in self.notes:
            buf.write(f"# {note}\n")
        cols = CSV_COLUMNS + (EMPIRICAL_COLUMNS if self.trials else [])
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols)
        for row in self.layers:
            values = [getattr(row, c) if c != "trials" else self.trials for c in cols]
            writer.writerow([_fmt(v) for v in values])
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def _gap_slopes(spec: NetworkSpec) -> list[list[float]]:
    """Rectifier slopes found in each gap between weighted layers.

    Gap 0 precedes the first weighted layer, gap ``L`` follows the last one.
    """
    gaps: list[list[float]] = [[]]
    for layer in spec.layers[1:]:
        if isinstance(layer, Activation):
            gaps[-1].append(layer.init_slope)
        elif isinstance(layer, (Conv, Fc)):
            gaps.append([])
    return gaps


def _rect_factor(slopes) -> float:
    f = 1.0
    for a in slopes:
        f *= 0.5 * (1.0 + a * a)
    return f


def predict_gains(spec: NetworkSpec, scheme, activation_a: float | None = None) -> VarianceReport:
    """Analytic per-layer variance gains and their cumulative products.

    Parameters
    ----------
    spec : NetworkSpec
    scheme : init scheme
        Per-layer ``std`` overrides in the spec take precedence.
    activation_a : float, optional
        Rectifier slope applied uniformly to every layer (0 for ReLU, the
        initial slope for PReLU, 1 for identity). When omitted, each layer uses
        the activations actually written in the spec: the one before it for the
        forward gain, the one after it for the backward gain; a gap with no
        activation counts as linear.

    Notes
    -----
    ``cum_fwd`` of layer ``l`` is the product of forward gains of layers
    ``2..l``; ``cum_bwd`` of layer ``l`` is the product of backward gains of
    layers ``max(l, 2)..L``.
    """
    weighted = spec.weighted_indices
    if not weighted:
        raise ValueError("spec has no weighted layers")
    gaps = _gap_slopes(spec)
    rows = []
    for l, idx in enumerate(weighted, start=1):
        layer = spec.layers[idx]
        if activation_a is None:
            f_fwd, f_bwd = _rect_factor(gaps[l - 1]), _rect_factor(gaps[l])
        else:
            f_fwd = f_bwd = 0.5 * (1.0 + activation_a ** 2)
        var = layer_variance(scheme, layer)
        n, n_hat = fan_in(layer), fan_out(layer)
        rows.append(LayerVariance(
            l, idx, "conv" if isinstance(layer, Conv) else "fc", n, n_hat,
            layer_std(scheme, layer), f_fwd * n * var, f_bwd * n_hat * var))
    cum = 1.0
    for row in rows[1:]:
        cum *= row.gain_fwd
        row.cum_fwd = cum
    cum = 1.0
    for row in reversed(rows[1:]):
        cum *= row.gain_bwd
        row.cum_bwd = cum
    rows[0].cum_bwd = cum
    return VarianceReport(rows)


def attenuation_vs_he(spec: NetworkSpec, fixed_std: float, direction: str = "bwd") -> float:
    """Std ratio of a fixed-std network's propagated signal to the He baseline.

    Multiplies ``fixed_std / he_std(l)`` over weighted layers ``2..L`` (the
    receiving first layer is excluded). ``direction`` picks the He variant used
    as the baseline.
    """
    if not fixed_std > 0:
        raise ValueError(f"fixed_std must be > 0, got {fixed_std}")
    base = HeBackward() if direction == "bwd" else HeForward()
    ratio = 1.0
    for layer in spec.weighted_layers()[1:]:
        ratio *= fixed_std / math.sqrt(init_variance(base, layer))
    return ratio


def monte_carlo_probe(spec: NetworkSpec, scheme, trials: int = 50, batch: int = 64,
                      seed: int = 0) -> VarianceReport:
    """Measure per-layer forward and backward variance ratios empirically.

    Trial ``t`` initializes the network with seed ``seed + t``, feeds a batch of
    unit Gaussian inputs in eval mode and backpropagates unit Gaussian noise
    injected at the logits. For weighted layer ``l`` it records

    * ``emp_fwd``: ``Var[y_l] / Var[y_{l-1}]`` (layers 2..L; layer 1 is blank),
    * ``emp_bwd``: ``Var[dx_l] / Var[dx_{l+1}]`` where ``dx_l`` is the gradient
      at the layer's input and ``dx_{L+1}`` the injected noise.

    Ratios are averaged over trials in trial order. The analytic columns come
    from :func:`predict_gains` with the spec's own activations, so pooling
    effects show up as a measured gap rather than being modelled.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    report = predict_gains(spec, scheme)
    weighted = spec.weighted_indices
    L = len(weighted)
    fwd = np.zeros((trials, L))
    bwd = np.zeros((trials, L))
    cum_f = np.zeros(trials)
    cum_b = np.zeros(trials)
    for t in range(trials):
        params = initialize_network(spec, scheme, seed + t)
        noise = np.random.Generator(np.random.PCG64([seed + t, 1]))
        h = noise.standard_normal((batch,) + tuple(spec.input_shape))
        y_var, caches = [], []
        for i, layer in enumerate(spec.layers):
            h, cache = layer_forward(layer, layer_params(params, i), h, "eval")
            caches.append(cache)
            if i in weighted:
                y_var.append(moments(h)[1])
        g = noise.standard_normal(h.shape)
        dx_var = [0.0] * (L + 1)
        dx_var[L] = moments(g)[1]
        for i in range(len(spec.layers) - 1, 0, -1):
            g, _ = layer_backward(spec.layers[i], layer_params(params, i), caches[i], g)
            if i in weighted:
                dx_var[weighted.index(i)] = moments(g)[1]
        y_var = np.array(y_var)
        dx_var = np.array(dx_var)
        fwd[t, 1:] = y_var[1:] / y_var[:-1]
        bwd[t] = dx_var[:-1] / dx_var[1:]
        cum_f[t] = y_var[-1] / y_var[0]
        cum_b[t] = dx_var[1] / dx_var[L] if L > 1 else 1.0
    fwd_mean = fwd.mean(axis=0)
    bwd_mean = bwd.mean(axis=0)
    for l, row in enumerate(report.layers):
        row.emp_fwd = float(fwd_mean[l]) if l > 0 else math.nan
        row.emp_bwd = float(bwd_mean[l])
    report.trials = trials
    report.empirical_cum_fwd = float(cum_f.mean())
    report.empirical_cum_bwd = float(cum_b.mean())
    return report


def decay_ratios(grad_history, params: Mapping[str, np.ndarray] | None, weight_decay: float) -> np.ndarray:
    """Per-step ``||g - wd*w|| / (wd*||w||)`` over all weight matrices.

    ``grad_history`` items are either mappings of total gradients (decay term
    included) keyed like ``params``, or ``(loss_grad_norm, weight_norm)`` pairs
    already measured at each step. Only ``*.W`` entries are used from mappings.
    With ``weight_decay == 0`` the denominator uses :data:`REFERENCE_DECAY`.
    """
    wd = weight_decay
    scale = wd if wd > 0 else REFERENCE_DECAY
    out = []
    for item in grad_history:
        if isinstance(item, Mapping):
            if params is None:
                raise ValueError("gradient mappings need the matching params")
            keys = [k for k in item if k.endswith(".W")]
            sq_g = sum(float(np.sum((item[k] - wd * params[k]) ** 2)) for k in keys)
            sq_w = sum(float(np.sum(params[k] ** 2)) for k in keys)
            g_norm, w_norm = math.sqrt(sq_g), math.sqrt(sq_w)
        else:
            g_norm, w_norm = item
        out.append(g_norm / (scale * w_norm) if w_norm > 0 else math.inf)
    return np.array(out)


def stall_diagnostic(grad_history, params=None, weight_decay: float = 0.0005,
                     window: int = 50, threshold: float = 0.05) -> str:
    """``"diminishing"`` when only weight decay is left moving the weights.

    The loss-driven part of the gradient, ``g - wd*w``, is compared with the
    decay term ``wd*w``. If the ratio of their norms stays below ``threshold``
    for each of the last ``window`` steps (or all steps, if fewer were
    recorded) the verdict is ``"diminishing"``, otherwise ``"healthy"``.

    When ``weight_decay`` is 0 there is no decay term to compare against; the
    loss gradient norm is then judged against ``REFERENCE_DECAY * ||w||``, an
    absolute-norm test on the same scale.
    """
    ratios = decay_ratios(grad_history, params, weight_decay)
    if len(ratios) < 2:
        raise ValueError("stall diagnostic needs at least two recorded steps")
    recent = ratios[-window:]
    return "diminishing" if bool(np.all(recent < threshold)) else "healthy"
