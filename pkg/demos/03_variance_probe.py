"""Measured vs predicted variance ratios in a 20-layer ReLU stack.

    python demos/03_variance_probe.py
"""

import numpy as np

from rectinit.analysis import monte_carlo_probe
from rectinit.init import HeForward, Xavier
from rectinit.model import load_spec

spec = load_spec("probe-relu-20")
for name, scheme in [("he-fwd", HeForward()), ("xavier", Xavier())]:
    r = monte_carlo_probe(spec, scheme, trials=20, batch=64)
    emp = r.column("emp_fwd")[1:]
    print(f"{name}: predicted per-layer gain {r.column('gain_fwd')[1]:.3f}, "
          f"measured {emp.min():.3f}..{emp.max():.3f}")
    print(f"        output/first-layer variance: predicted {r.forward_product:.3g}, "
          f"measured {r.empirical_cum_fwd:.3g}")
    print(f"        backward per-layer measured {np.min(r.column('emp_bwd')):.3f}.."
          f"{np.max(r.column('emp_bwd')):.3f}")
