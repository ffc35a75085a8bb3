"""Parametric ReLU and rectifier-aware initialization for deep networks.

Submodules
----------
tensor    float64 tensor helpers and a seeded random stream
model     spec files, layer kernels (conv, fc, pooling, PReLU, dropout) and loss
init      He / Xavier / fixed / PReLU-aware weight initialization
optim     momentum SGD without weight decay on PReLU slopes
analysis  analytic and Monte-Carlo variance propagation, stall diagnosis
data      IDX files and synthetic Gaussian classes
train     training loop, evaluation and gradient checking
cli       ``rectinit`` command-line runner
"""

from . import analysis, data, init, model, optim, tensor, train

__version__ = "0.1.0"

__all__ = ["analysis", "data", "init", "model", "optim", "tensor", "train"]
