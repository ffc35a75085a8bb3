"""Train a 30-layer ReLU MLP from he-fwd and from xavier init on synthetic data.

The xavier run starts with a signal shrunk by about 2**29 at the output, its
loss gradient vanishes next to the weight-decay term and it never moves off
chance. Takes roughly half a minute.

    python demos/04_deep_convergence.py
"""

from rectinit.data import synth_gaussian_classes
from rectinit.init import HeForward, Xavier
from rectinit.model import load_spec
from rectinit.train import TrainConfig, train

data = synth_gaussian_classes(classes=10, per_class=300, dims=64, separation=4.0, seed=0)
spec = load_spec("mlp-30")

for name, scheme in [("he-fwd", HeForward()), ("xavier", Xavier())]:
    run = train(spec, data, None, TrainConfig(epochs=20, scheme=scheme, seed=1))
    print(f"{name}: status={run.status}")
    for rec in run.split("train")[::4] + [run.final]:
        print(f"  epoch {rec.epoch:2d}  loss {rec.loss:.4f}  top1 err {rec.top1:.3f}  stall={rec.stall_verdict}")
