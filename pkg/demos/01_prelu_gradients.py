"""PReLU forward/backward on a toy batch, checked against finite differences.

    python demos/01_prelu_gradients.py
"""

import numpy as np

from rectinit.model import load_spec, prelu_backward, prelu_forward
from rectinit.train import grad_check

y = np.array([[-2.0, 3.0], [-0.5, -1.0]])  # batch 2, channels 2
slopes = np.array([0.25, 0.1])
print("y        =", y.tolist())
print("prelu(y) =", prelu_forward(y, slopes).tolist())

upstream = np.ones_like(y)
grad_y, grad_a = prelu_backward(y, slopes, False, upstream)
print("dL/dy    =", grad_y.tolist())
print("dL/da    =", grad_a.tolist(), "(sum of y over the negative entries of each channel)")

_, grad_shared = prelu_backward(y, np.array([0.25]), True, upstream)
print("shared dL/da =", grad_shared.tolist())

# Whole-network check: conv + maxpool + both PReLU variants + dropout + fc.
report = grad_check(load_spec("gradcheck-small"))
print()
print(report.format())
