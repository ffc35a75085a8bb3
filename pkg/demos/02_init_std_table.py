"""Per-layer init std and the variance products it implies, for a 10-layer conv stack.

    python demos/02_init_std_table.py
"""

from rectinit.analysis import attenuation_vs_he, predict_gains
from rectinit.init import FixedStd, HeBackward, HeForward, Xavier, init_std
from rectinit.model import load_spec

spec = load_spec("vgg-b")
print(f"{'layer':>5} {'filters':>7} {'he-fwd':>7} {'he-bwd':>7} {'xavier':>7}")
for i, layer in enumerate(spec.weighted_layers(), start=1):
    stds = [init_std(s, layer) for s in (HeForward(), HeBackward(), Xavier())]
    print(f"{i:>5} {layer.filters:>7} " + " ".join(f"{v:7.3f}" for v in stds))

print()
for name, scheme in [("he-fwd", HeForward()), ("he-bwd", HeBackward()), ("xavier", Xavier()),
                     ("fixed:0.01", FixedStd(0.01))]:
    r = predict_gains(spec, scheme)
    print(f"{name:>10}: forward product {r.forward_product:10.4g}   backward product {r.backward_product:10.4g}")

ratio = attenuation_vs_he(spec, 0.01)
print(f"\nstd 0.01 everywhere shrinks the backward signal to {ratio:.3g} (= 1/{1 / ratio:.3g}) "
      "of the he-bwd baseline over layers 2..10")
