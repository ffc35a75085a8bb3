"""Training loop, evaluation and finite-difference gradient checking."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import stall_diagnostic
from .data import Dataset, batches
from .init import HeForward, initialize_network
from .model.layers import softmax_xent
from .model.network import forward, loss_and_grads
from .model.spec import Activation, NetworkSpec
from .optim import OptimConfig, OptState, is_slope, sgd_step
from .tensor import NonFiniteError, RngStream

__all__ = [
    "TrainConfig",
    "EpochRecord",
    "TrainRun",
    "train",
    "evaluate",
    "GradCheckReport",
    "grad_check",
    "DIVERGENCE_LOSS",
]

DIVERGENCE_LOSS = 1e6


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 128
    optim: OptimConfig = field(default_factory=OptimConfig)
    scheme: object = field(default_factory=HeForward)
    activation: Activation | None = None
    seed: int = 0
    eval_every: int = 1
    freeze_slopes: bool = False
    stall_window: int = 50
    stall_threshold: float = 0.05

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class EpochRecord:
    epoch: int
    split: str
    loss: float
    top1: float
    grad_norms: list[float] = field(default_factory=list)
    slope_means: list[float] = field(default_factory=list)
    slope_absmax: list[float] = field(default_factory=list)
    stall_verdict: str = ""


@dataclass
class TrainRun:
    """Per-epoch metrics of one run.

    ``initial`` holds the epoch-0 evaluation taken before any update;
    ``records`` holds one train row (and a val row when evaluated) for every
    completed epoch.
    """

    records: list[EpochRecord]
    initial: list[EpochRecord]
    params: dict
    status: str = "completed"
    weighted_layers: int = 0
    slope_layers: int = 0
    step_ratios: list[float] = field(default_factory=list)

    def split(self, name: str = "train") -> list[EpochRecord]:
        return [r for r in self.records if r.split == name]

    @property
    def epochs_completed(self) -> int:
        return len(self.split("train"))

    @property
    def initial_loss(self) -> float:
        return self.initial[0].loss

    @property
    def final(self) -> EpochRecord:
        return self.split("train")[-1]

    @property
    def stall_verdict(self) -> str:
        rows = self.split("train")
        return rows[-1].stall_verdict if rows else ""

    def losses(self, split: str = "train") -> list[float]:
        return [r.loss for r in self.split(split)]

    def slope_fraction_above_one(self) -> float:
        """Fraction of learned PReLU slopes with magnitude above 1 (nan if none)."""
        slopes = [v for k, v in self.params.items() if is_slope(k)]
        if not slopes:
            return math.nan
        flat = np.concatenate(slopes)
        return float(np.mean(np.abs(flat) > 1.0))

    def to_csv(self, header: dict | None = None) -> str:
        buf = io.StringIO()
        for key, value in (header or {}).items():
            buf.write(f"# {key}={value}\n")
        buf.write(f"# status={self.status}\n")
        frac = self.slope_fraction_above_one()
        if not math.isnan(frac):
            buf.write(f"# slope_fraction_abs_gt_1={frac!r}\n")
        cols = (["epoch", "split", "loss", "top1"]
                + [f"grad_norm_l{i}" for i in range(1, self.weighted_layers + 1)]
                + [f"slope_mean_l{j}" for j in range(1, self.slope_layers + 1)]
                + [f"slope_absmax_l{j}" for j in range(1, self.slope_layers + 1)]
                + ["stall_verdict"])
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols)
        for r in self.initial + self.records:
            grads = r.grad_norms or [None] * self.weighted_layers
            means = r.slope_means or [None] * self.slope_layers
            maxes = r.slope_absmax or [None] * self.slope_layers
            row = [r.epoch, r.split, r.loss, r.top1, *grads, *means, *maxes, r.stall_verdict]
            writer.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in row])
        return buf.getvalue()


def evaluate(params: dict, spec: NetworkSpec, dataset: Dataset, chunk: int = 1024) -> tuple[float, float]:
    """Top-1 error and mean loss in eval mode.

    ``argmax`` ties resolve to the lowest class index.
    """
    wrong, loss_sum = 0, 0.0
    for start in range(0, len(dataset), chunk):
        x = dataset.inputs[start:start + chunk]
        y = dataset.labels[start:start + chunk]
        logits = forward(spec, params, x, "eval")
        loss, _ = softmax_xent(logits, y)
        loss_sum += loss * len(y)
        wrong += int(np.sum(np.argmax(logits, axis=1) != y))
    n = len(dataset)
    return wrong / n, loss_sum / n


def _slope_stats(spec: NetworkSpec, params: dict):
    means, maxes = [], []
    for i in spec.activation_indices:
        key = f"{i}.slopes"
        if key in params:
            means.append(float(np.mean(params[key])))
            maxes.append(float(np.max(np.abs(params[key]))))
    return means, maxes


def _eval_record(params, spec, dataset, epoch, split):
    with np.errstate(all="ignore"):
        top1, loss = evaluate(params, spec, dataset)
    means, maxes = _slope_stats(spec, params)
    return EpochRecord(epoch, split, loss, top1, slope_means=means, slope_absmax=maxes)


def train(spec: NetworkSpec, dataset_train: Dataset, dataset_val: Dataset | None,
          config: TrainConfig) -> TrainRun:
    """Minibatch SGD with momentum, deterministic in ``config.seed``.

    Weights come from ``config.scheme`` seeded with ``config.seed``; dropout
    masks from a stream seeded ``seed + 1``; the batch order from
    ``(seed, epoch)``. After each epoch the full training set (and the
    validation set every ``eval_every`` epochs) is evaluated in eval mode.

    A non-finite loss or one above ``DIVERGENCE_LOSS`` ends the run with status
    ``"diverged"``. A run whose last stall verdict is ``"diminishing"`` ends
    with status ``"stalled"``.
    """
    if config.activation is not None:
        spec = spec.with_activation(config.activation)
    if tuple(dataset_train.inputs.shape[1:]) != tuple(spec.input_shape):
        raise ValueError(f"dataset inputs {dataset_train.inputs.shape[1:]} do not match "
                         f"spec input {spec.input_shape}")
    if dataset_train.class_count > spec.classes:
        raise ValueError(f"dataset has {dataset_train.class_count} classes, spec has {spec.classes}")

    params = initialize_network(spec, config.scheme, config.seed)
    state = OptState()
    dropout_rng = RngStream(config.seed + 1)
    weighted = spec.weighted_indices
    frozen = {k for k in params if is_slope(k)} if config.freeze_slopes else set()
    wd = config.optim.weight_decay

    run = TrainRun([], [_eval_record(params, spec, dataset_train, 0, "train")], params,
                   weighted_layers=len(weighted),
                   slope_layers=sum(1 for i in spec.activation_indices if f"{i}.slopes" in params))
    if dataset_val is not None:
        run.initial.append(_eval_record(params, spec, dataset_val, 0, "val"))
    history = []

    for epoch in range(1, config.epochs + 1):
        lr = config.optim.lr_at(epoch)
        norm_sums = np.zeros(len(weighted))
        steps = 0
        for idx in batches(dataset_train, config.batch_size, config.seed, epoch):
            try:
                with np.errstate(all="ignore"):
                    loss, grads, _ = loss_and_grads(spec, params, dataset_train.inputs[idx],
                                                    dataset_train.labels[idx], "train", dropout_rng)
            except NonFiniteError:
                run.status = "diverged"
                break
            if not math.isfinite(loss) or loss > DIVERGENCE_LOSS:
                run.status = "diverged"
                break
            sq = [float(np.sum(grads[f"{i}.W"] ** 2)) for i in weighted]
            norm_sums += np.sqrt(sq)
            w_norm = math.sqrt(sum(float(np.sum(params[f"{i}.W"] ** 2)) for i in weighted))
            history.append((math.sqrt(sum(sq)), w_norm))
            with np.errstate(all="ignore"):
                sgd_step(params, grads, state, config.optim, lr=lr, frozen=frozen)
            steps += 1
        if run.status == "diverged":
            break
        rec = _eval_record(params, spec, dataset_train, epoch, "train")
        if not math.isfinite(rec.loss) or rec.loss > DIVERGENCE_LOSS:
            run.status = "diverged"
            break
        rec.grad_norms = [float(v) for v in norm_sums / max(steps, 1)]
        if len(history) >= 2:
            rec.stall_verdict = stall_diagnostic(history, None, wd, config.stall_window,
                                                 config.stall_threshold)
        run.records.append(rec)
        if dataset_val is not None and epoch % config.eval_every == 0:
            run.records.append(_eval_record(params, spec, dataset_val, epoch, "val"))

    if run.status != "diverged" and run.stall_verdict == "diminishing":
        run.status = "stalled"
    run.step_ratios = [g / ((wd or 0.0005) * w) if w > 0 else math.inf for g, w in history]
    return run


@dataclass
class GradCheckReport:
    errors: dict[str, float]
    tolerance: float

    @property
    def max_error(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

    @property
    def failing(self) -> list[str]:
        return [k for k, e in self.errors.items() if not e <= self.tolerance]

    @property
    def passed(self) -> bool:
        return not self.failing

    def format(self) -> str:
        lines = [f"{k:>12s}  max_rel_err={e:.3e}  {'FAIL' if not e <= self.tolerance else 'ok'}"
                 for k, e in self.errors.items()]
        lines.append(f"max relative error {self.max_error:.3e} (tolerance {self.tolerance:g}): "
                     f"{'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def grad_check(spec: NetworkSpec, seed: int = 0, step: float = 1e-5, tolerance: float = 1e-5,
               batch: int = 4, params: dict | None = None, inputs=None, labels=None,
               corrupt_slopes: bool = False) -> GradCheckReport:
    """Compare backprop gradients with central finite differences.

    Every scalar parameter (weights, biases, PReLU slopes) is perturbed by
    ``+-step`` and the per-parameter-tensor maximum of
    ``|analytic - numeric| / max(|analytic|, |numeric|, 1e-12)`` is reported.
    Dropout runs in train mode with the same mask for every evaluation.
    Default parameters are a He initialization with biases redrawn uniformly
    from ``[-0.1, 0.1]``: zero biases behind dead units would put
    pre-activations exactly on the rectifier kink.
    ``corrupt_slopes`` doubles the analytic slope gradients, to prove the check
    can fail.
    """
    gen = np.random.Generator(np.random.PCG64([seed, 7]))
    if params is None:
        params = initialize_network(spec, HeForward(), seed)
        for key in params:
            if key.endswith(".b"):
                params[key] = gen.uniform(-0.1, 0.1, params[key].shape)
    if inputs is None:
        inputs = gen.uniform(-1.0, 1.0, (batch,) + tuple(spec.input_shape))
    if labels is None:
        labels = gen.integers(0, spec.classes, len(inputs))

    def loss_at():
        logits = forward(spec, params, inputs, "train", RngStream(seed + 2))
        return softmax_xent(logits, labels)[0]

    _, grads, _ = loss_and_grads(spec, params, inputs, labels, "train", RngStream(seed + 2))
    errors = {}
    for key, p in params.items():
        analytic = grads[key] * (2.0 if corrupt_slopes and is_slope(key) else 1.0)
        numeric = np.zeros_like(p)
        flat, nflat = p.reshape(-1), numeric.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            up = loss_at()
            flat[j] = orig - step
            down = loss_at()
            flat[j] = orig
            nflat[j] = (up - down) / (2 * step)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-12)
        errors[key] = float(np.max(np.abs(analytic - numeric) / denom))
    return GradCheckReport(errors, tolerance)
