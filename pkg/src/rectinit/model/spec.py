"""Declarative network descriptions and the line-oriented spec file format.

A spec file holds one layer per line; tokens are whitespace separated and
``#`` starts a comment::

    input 3x32x32
    conv 3x3 64 stride 1 pad same
    act prelu 0.25
    maxpool 2x2 stride 2
    fc 10
    softmax 10

Accepted lines:

* ``input C x H x W`` (spaces around ``x`` optional)
* ``conv KxK D [stride S] [pad valid|same] [std SIGMA]``; the filter size may
  be written ``KxKxC`` to assert the input channel count
* ``fc D [std SIGMA]``
* ``maxpool KxK [stride S]`` (stride defaults to K)
* ``act relu | lrelu A | prelu A | prelu_shared A | identity``
* ``dropout P``
* ``softmax CLASSES``

Conv stride defaults to 1 and padding to ``valid``. The optional ``std`` token
pins that layer's initial weight std regardless of the init scheme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Union

__all__ = [
    "SpecError",
    "Input",
    "Conv",
    "Fc",
    "MaxPool",
    "Activation",
    "Dropout",
    "SoftmaxXent",
    "NetworkSpec",
    "ACTIVATION_KINDS",
    "parse_spec",
    "load_spec",
    "build_spec",
    "conv_output_size",
]


class SpecError(ValueError):
    """Invalid network description; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


ACTIVATION_KINDS = ("relu", "lrelu", "prelu", "prelu_shared", "identity")


@dataclass(frozen=True)
class Input:
    channels: int
    height: int
    width: int


@dataclass(frozen=True)
class Conv:
    k: int
    filters: int
    stride: int = 1
    padding: str = "valid"
    in_channels: int | None = None
    std: float | None = None


@dataclass(frozen=True)
class Fc:
    units: int
    in_units: int | None = None
    std: float | None = None


@dataclass(frozen=True)
class MaxPool:
    k: int
    stride: int


@dataclass(frozen=True)
class Activation:
    """Rectifier family member.

    ``a`` is the fixed negative slope for ``lrelu`` and the initial slope for
    ``prelu`` / ``prelu_shared``; it is ignored by ``relu`` and ``identity``.
    """

    kind: str
    a: float = 0.0

    @property
    def parametric(self) -> bool:
        return self.kind in ("prelu", "prelu_shared")

    @property
    def init_slope(self) -> float:
        """Negative-side slope at initialization."""
        return {"relu": 0.0, "identity": 1.0}.get(self.kind, self.a)

    def __str__(self):
        if self.kind in ("relu", "identity"):
            return self.kind
        return f"{self.kind} {self.a:g}"


@dataclass(frozen=True)
class Dropout:
    rate: float


@dataclass(frozen=True)
class SoftmaxXent:
    classes: int


Layer = Union[Input, Conv, Fc, MaxPool, Activation, Dropout, SoftmaxXent]
WEIGHTED = (Conv, Fc)


def conv_output_size(size: int, k: int, stride: int, padding: str) -> tuple[int, int, int]:
    """Return ``(out, pad_before, pad_after)`` along one spatial axis.

    ``same`` pads with zeros so that ``out == ceil(size / stride)``; an odd total
    pad puts the extra row/column after.
    """
    if padding == "valid":
        return (size - k) // stride + 1, 0, 0
    out = -(-size // stride)
    total = max((out - 1) * stride + k - size, 0)
    return out, total // 2, total - total // 2


@dataclass
class NetworkSpec:
    """Validated layer stack with inferred per-layer shapes.

    ``shapes[i]`` is the per-example output shape of ``layers[i]``, so
    ``shapes[0]`` is the input shape and ``shapes[-1]`` the class count.
    """

    layers: list
    shapes: list = field(default_factory=list)
    lines: list = field(default_factory=list)

    @property
    def input_shape(self) -> tuple[int, ...]:
        return self.shapes[0]

    @property
    def weighted_indices(self) -> list[int]:
        return [i for i, layer in enumerate(self.layers) if isinstance(layer, WEIGHTED)]

    @property
    def activation_indices(self) -> list[int]:
        return [i for i, layer in enumerate(self.layers) if isinstance(layer, Activation)]

    @property
    def depth(self) -> int:
        """Number of weighted (conv + fc) layers."""
        return len(self.weighted_indices)

    @property
    def classes(self) -> int:
        return self.layers[-1].classes

    def weighted_layers(self) -> list:
        return [self.layers[i] for i in self.weighted_indices]

    def with_activation(self, act: Activation) -> "NetworkSpec":
        """Copy of this spec with every activation layer replaced by ``act``."""
        layers = [act if isinstance(layer, Activation) else layer for layer in self.layers]
        return NetworkSpec(layers, list(self.shapes), list(self.lines))

    def to_text(self) -> str:
        return "\n".join(_format_layer(layer) for layer in self.layers) + "\n"


def _format_layer(layer) -> str:
    if isinstance(layer, Input):
        return f"input {layer.channels}x{layer.height}x{layer.width}"
    if isinstance(layer, Conv):
        s = f"conv {layer.k}x{layer.k} {layer.filters} stride {layer.stride} pad {layer.padding}"
        return s + (f" std {layer.std:g}" if layer.std is not None else "")
    if isinstance(layer, Fc):
        return f"fc {layer.units}" + (f" std {layer.std:g}" if layer.std is not None else "")
    if isinstance(layer, MaxPool):
        return f"maxpool {layer.k}x{layer.k} stride {layer.stride}"
    if isinstance(layer, Activation):
        return f"act {layer}"
    if isinstance(layer, Dropout):
        return f"dropout {layer.rate:g}"
    return f"softmax {layer.classes}"


def _int(tok: str, what: str, line: int) -> int:
    try:
        v = int(tok)
    except ValueError:
        raise SpecError(f"{what} must be an integer, got {tok!r}", line) from None
    if v < 1:
        raise SpecError(f"{what} must be >= 1, got {v}", line)
    return v


def _float(tok: str, what: str, line: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise SpecError(f"{what} must be a number, got {tok!r}", line) from None
    if not math.isfinite(v):
        raise SpecError(f"{what} must be finite", line)
    return v


def _options(tokens: list[str], allowed: tuple[str, ...], line: int) -> dict[str, str]:
    if len(tokens) % 2:
        raise SpecError(f"dangling option {tokens[-1]!r}", line)
    opts = {}
    for key, value in zip(tokens[::2], tokens[1::2]):
        if key not in allowed:
            raise SpecError(f"unknown option {key!r} (expected one of {', '.join(allowed)})", line)
        opts[key] = value
    return opts


def _square(tok: str, line: int) -> tuple[int, int | None]:
    parts = tok.lower().split("x")
    if len(parts) == 1:
        parts = parts * 2
    if len(parts) not in (2, 3) or parts[0] != parts[1]:
        raise SpecError(f"expected a square window like 3x3 or 3x3xC, got {tok!r}", line)
    k = _int(parts[0], "window size", line)
    c = _int(parts[2], "input channels", line) if len(parts) == 3 else None
    return k, c


def _parse_line(tokens: list[str], line: int):
    kw, rest = tokens[0].lower(), tokens[1:]
    if kw == "input":
        dims = "".join(rest).lower().split("x")
        if len(dims) != 3:
            raise SpecError("input expects C x H x W", line)
        return Input(*(_int(d, "input dimension", line) for d in dims))
    if kw == "conv":
        if len(rest) < 2:
            raise SpecError("conv expects KxK D", line)
        k, c = _square(rest[0], line)
        opts = _options(rest[2:], ("stride", "pad", "std"), line)
        pad = opts.get("pad", "valid")
        if pad not in ("valid", "same"):
            raise SpecError(f"pad must be valid or same, got {pad!r}", line)
        std = _float(opts["std"], "std", line) if "std" in opts else None
        return Conv(k, _int(rest[1], "filter count", line),
                    _int(opts.get("stride", "1"), "stride", line), pad, c, std)
    if kw == "fc":
        if not rest:
            raise SpecError("fc expects a unit count", line)
        opts = _options(rest[1:], ("std",), line)
        std = _float(opts["std"], "std", line) if "std" in opts else None
        return Fc(_int(rest[0], "units", line), None, std)
    if kw == "maxpool":
        if not rest:
            raise SpecError("maxpool expects KxK", line)
        k, c = _square(rest[0], line)
        if c is not None:
            raise SpecError("maxpool window takes no channel count", line)
        opts = _options(rest[1:], ("stride",), line)
        return MaxPool(k, _int(opts.get("stride", str(k)), "stride", line))
    if kw == "act":
        if not rest:
            raise SpecError("act expects a kind", line)
        kind = rest[0].lower()
        if kind not in ACTIVATION_KINDS:
            raise SpecError(f"unknown activation {kind!r}", line)
        if kind in ("relu", "identity"):
            if len(rest) != 1:
                raise SpecError(f"{kind} takes no argument", line)
            return Activation(kind)
        if len(rest) != 2:
            raise SpecError(f"{kind} expects a slope", line)
        return Activation(kind, _float(rest[1], "slope", line))
    if kw == "dropout":
        if len(rest) != 1:
            raise SpecError("dropout expects a rate", line)
        p = _float(rest[0], "dropout rate", line)
        if not 0 <= p < 1:
            raise SpecError(f"dropout rate must be in [0, 1), got {p}", line)
        return Dropout(p)
    if kw == "softmax":
        if len(rest) != 1:
            raise SpecError("softmax expects a class count", line)
        return SoftmaxXent(_int(rest[0], "classes", line))
    raise SpecError(f"unknown layer keyword {kw!r}", line)


def build_spec(layers, lines=None) -> NetworkSpec:
    """Validate a layer list, infer shapes and fill in input channel/unit counts."""
    layers = list(layers)
    lines = list(lines) if lines is not None else [None] * len(layers)
    if not layers or not isinstance(layers[0], Input):
        raise SpecError("spec must begin with an input layer", lines[0] if lines else None)
    if not isinstance(layers[-1], SoftmaxXent):
        raise SpecError("spec must end with a softmax layer", lines[-1])

    shape: tuple[int, ...] = (layers[0].channels, layers[0].height, layers[0].width)
    shapes = [shape]
    resolved = [layers[0]]
    prev_filters = None
    for layer, line in zip(layers[1:], lines[1:]):
        if isinstance(layer, Input):
            raise SpecError("input may only appear first", line)
        if isinstance(layer, SoftmaxXent) and layer is not layers[-1]:
            raise SpecError("softmax may only appear last", line)
        if isinstance(layer, Conv):
            if len(shape) != 3:
                raise SpecError(
                    f"channel mismatch: conv needs a CxHxW input but the previous "
                    f"layer produces {len(shape)}-d output {shape}", line)
            c, h, w = shape
            if layer.in_channels is not None and layer.in_channels != c:
                raise SpecError(
                    f"channel mismatch: conv declares {layer.in_channels} input "
                    f"channels but receives {c}", line)
            if prev_filters is not None and c != prev_filters:
                raise SpecError(f"channel mismatch: {c} != previous filter count {prev_filters}", line)
            ho, _, _ = conv_output_size(h, layer.k, layer.stride, layer.padding)
            wo, _, _ = conv_output_size(w, layer.k, layer.stride, layer.padding)
            if ho < 1 or wo < 1:
                raise SpecError(f"conv {layer.k}x{layer.k} does not fit input {shape}", line)
            layer = replace(layer, in_channels=c)
            shape = (layer.filters, ho, wo)
            prev_filters = layer.filters
        elif isinstance(layer, Fc):
            n = math.prod(shape)
            if layer.in_units is not None and layer.in_units != n:
                raise SpecError(f"fc declares {layer.in_units} inputs but receives {n}", line)
            layer = replace(layer, in_units=n)
            shape = (layer.units,)
            prev_filters = None
        elif isinstance(layer, MaxPool):
            if len(shape) != 3:
                raise SpecError(f"maxpool needs a CxHxW input, got {shape}", line)
            c, h, w = shape
            ho, wo = (h - layer.k) // layer.stride + 1, (w - layer.k) // layer.stride + 1
            if ho < 1 or wo < 1:
                raise SpecError(f"maxpool {layer.k}x{layer.k} does not fit input {shape}", line)
            shape = (c, ho, wo)
        elif isinstance(layer, Dropout):
            if not 0 <= layer.rate < 1:
                raise SpecError(f"dropout rate must be in [0, 1), got {layer.rate}", line)
        elif isinstance(layer, Activation):
            if layer.kind not in ACTIVATION_KINDS:
                raise SpecError(f"unknown activation {layer.kind!r}", line)
        elif isinstance(layer, SoftmaxXent):
            n = math.prod(shape)
            if n != layer.classes:
                raise SpecError(f"softmax over {layer.classes} classes receives {n} values", line)
            shape = (layer.classes,)
        else:
            raise SpecError(f"unknown layer {layer!r}", line)
        resolved.append(layer)
        shapes.append(shape)
    return NetworkSpec(resolved, shapes, lines)


def parse_spec(text: str) -> NetworkSpec:
    """Parse spec-file contents into a validated :class:`NetworkSpec`."""
    layers, lines = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if tokens:
            layers.append(_parse_line(tokens, lineno))
            lines.append(lineno)
    if not layers:
        raise SpecError("empty spec")
    return build_spec(layers, lines)


def load_spec(path) -> NetworkSpec:
    """Parse a spec file; bare names like ``vgg-b`` resolve to bundled specs."""
    p = Path(path)
    if not p.exists():
        bundled = Path(__file__).resolve().parent.parent / "specs" / p.name
        for candidate in (bundled, bundled.with_name(p.name + ".spec")):
            if candidate.exists():
                p = candidate
                break
    return parse_spec(p.read_text(encoding="utf-8"))
