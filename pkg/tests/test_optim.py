import numpy as np
import pytest

from rectinit.optim import OptimConfig, OptState, parse_lr_steps, sgd_step
from rectinit.tensor import ShapeError


def step(params, grads, config, state=None, **kw):
    state = state or OptState()
    sgd_step(params, grads, state, config, **kw)
    return state


def test_plain_sgd():
    p = {"1.W": np.array([1.0])}
    step(p, {"1.W": np.array([0.5])}, OptimConfig(0.1, 0.0, 0.0))
    assert p["1.W"].tolist() == [0.95]


def test_momentum_velocity():
    p = {"1.W": np.array([0.0])}
    cfg = OptimConfig(1.0, 0.9, 0.0)
    state = step(p, {"1.W": np.array([1.0])}, cfg)
    step(p, {"1.W": np.array([0.2])}, cfg, state)
    assert np.isclose(state.velocity["1.W"][0], 1.1)
    assert np.isclose(p["1.W"][0], -2.1)


def test_weight_decay_shrinks_weights_without_gradient():
    p = {"1.W": np.array([2.0, -2.0])}
    step(p, {"1.W": np.zeros(2)}, OptimConfig(0.1, 0.0, 0.5))
    assert p["1.W"].tolist() == [1.9, -1.9]


@pytest.mark.parametrize("wd", [0.0, 0.0005, 0.5])
def test_slopes_ignore_weight_decay(wd):
    p = {"2.slopes": np.array([0.25, -0.5])}
    cfg = OptimConfig(0.1, 0.9, wd)
    state = None
    for _ in range(5):
        state = step(p, {"2.slopes": np.zeros(2)}, cfg, state)
    assert p["2.slopes"].tolist() == [0.25, -0.5]


def test_frozen_keys_untouched():
    p = {"1.W": np.array([1.0]), "2.slopes": np.array([0.25])}
    step(p, {"1.W": np.array([1.0]), "2.slopes": np.array([1.0])}, OptimConfig(0.1, 0.0, 0.0),
         frozen={"2.slopes"})
    assert p["2.slopes"].tolist() == [0.25] and p["1.W"].tolist() == [0.9]


def test_descends_quadratic():
    p = {"1.W": np.array([3.0, -4.0])}
    cfg = OptimConfig(0.1, 0.9, 0.0)
    state = None
    for _ in range(200):
        state = step(p, {"1.W": p["1.W"].copy()}, cfg, state)
    assert np.abs(p["1.W"]).max() < 1e-3


def test_shape_mismatch():
    with pytest.raises(ShapeError):
        step({"1.W": np.zeros(2)}, {"1.W": np.zeros(3)}, OptimConfig())


def test_schedule_is_exact():
    cfg = OptimConfig(0.01, lr_schedule=parse_lr_steps("10:0.001,20:0.0001"))
    assert [cfg.lr_at(e) for e in (1, 9, 10, 19, 20, 50)] == [0.01, 0.01, 0.001, 0.001, 0.0001, 0.0001]


def test_parse_lr_steps_errors():
    with pytest.raises(ValueError):
        parse_lr_steps("10")
    with pytest.raises(ValueError):
        parse_lr_steps("a:0.1")


@pytest.mark.parametrize("kw", [dict(learning_rate=-1), dict(momentum=1.0), dict(weight_decay=-0.1)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        OptimConfig(**kw)
