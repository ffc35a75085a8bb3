"""Network specs, layer kernels and whole-network passes."""

from .layers import (
    conv_backward,
    conv_forward,
    layer_backward,
    layer_forward,
    prelu_backward,
    prelu_forward,
    softmax_xent,
)
from .network import count_extra_slope_params, forward, layer_params, loss_and_grads, slope_count
from .spec import (
    ACTIVATION_KINDS,
    Activation,
    Conv,
    Dropout,
    Fc,
    Input,
    MaxPool,
    NetworkSpec,
    SoftmaxXent,
    SpecError,
    build_spec,
    conv_output_size,
    load_spec,
    parse_spec,
)

__all__ = [
    "ACTIVATION_KINDS",
    "Activation",
    "Conv",
    "Dropout",
    "Fc",
    "Input",
    "MaxPool",
    "NetworkSpec",
    "SoftmaxXent",
    "SpecError",
    "build_spec",
    "conv_backward",
    "conv_forward",
    "conv_output_size",
    "count_extra_slope_params",
    "forward",
    "layer_backward",
    "layer_forward",
    "layer_params",
    "load_spec",
    "loss_and_grads",
    "parse_spec",
    "prelu_backward",
    "prelu_forward",
    "slope_count",
    "softmax_xent",
]
