import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import relu_stacks
from rectinit.analysis import (CSV_COLUMNS, REFERENCE_DECAY, attenuation_vs_he, decay_ratios,
                               monte_carlo_probe, predict_gains, stall_diagnostic)
from rectinit.init import FixedStd, HeBackward, HeForward, PReluAware, Xavier, init_std
from rectinit.model import load_spec, parse_spec


def close(a, b, tol=1e-12):
    return math.isclose(a, b, rel_tol=tol)


@settings(max_examples=100, deadline=None)
@given(relu_stacks())
def test_he_products(case):
    text, c2, d_last = case
    spec = parse_spec(text)
    fwd = predict_gains(spec, HeForward())
    assert all(close(g, 1.0) for g in fwd.column("gain_fwd")[1:])
    assert close(fwd.forward_product, 1.0)
    bwd = predict_gains(spec, HeBackward())
    assert close(bwd.backward_product, 1.0)
    assert close(bwd.forward_product, c2 / d_last)


@settings(max_examples=50, deadline=None)
@given(relu_stacks(), st.floats(-2, 2), st.sampled_from(["fwd", "bwd"]))
def test_prelu_aware_unit_gain(case, a, direction):
    report = predict_gains(parse_spec(case[0]), PReluAware(a, direction), activation_a=a)
    gains = report.column("gain_fwd" if direction == "fwd" else "gain_bwd")
    assert all(close(g, 1.0) for g in gains)


def test_vgg_b_he_bwd_forward_product(vgg_b):
    assert close(predict_gains(vgg_b, HeBackward()).forward_product, 64 / 512)


def test_xavier_halves_each_layer():
    spec = load_spec("mlp-14")
    report = predict_gains(spec, Xavier(), activation_a=0.0)
    assert all(close(g, 0.5) for g in report.column("gain_fwd"))
    assert close(report.forward_product, 0.5 ** 13)


def test_identity_xavier_unit_gain():
    spec = load_spec("mlp-14")
    report = predict_gains(spec, Xavier(), activation_a=1.0)
    assert all(close(g, 1.0) for g in report.column("gain_fwd"))


def test_missing_activation_counts_as_linear():
    spec = parse_spec("input 8x1x1\nfc 8\nfc 8\nsoftmax 8")
    report = predict_gains(spec, Xavier())
    assert report.column("gain_fwd").tolist() == [1.0, 1.0]


def test_vgg_b_attenuation(vgg_b):
    ratio = attenuation_vs_he(vgg_b, 0.01)
    expected = 1.0
    for layer in vgg_b.weighted_layers()[1:]:
        expected *= 0.01 / init_std(HeBackward(), layer)
    assert close(ratio, expected)
    assert abs(1 / ratio / 1.7e4 - 1) < 0.05


def test_attenuation_matching_std_is_one():
    spec = parse_spec("input 128x1x1\n" + "fc 128\nact relu\n" * 5 + "softmax 128")
    std = init_std(HeBackward(), spec.weighted_layers()[1])
    assert close(attenuation_vs_he(spec, std), 1.0)


def test_attenuation_single_layer_is_one():
    assert attenuation_vs_he(parse_spec("input 4x1x1\nfc 3\nsoftmax 3"), 0.01) == 1.0


def test_attenuation_rejects_nonpositive():
    with pytest.raises(ValueError):
        attenuation_vs_he(load_spec("mlp-14"), 0.0)


def test_report_csv_columns(vgg_b):
    text = predict_gains(vgg_b, FixedStd(0.01)).to_csv({"scheme": "fixed:0.01"})
    lines = text.splitlines()
    assert lines[0] == "# scheme=fixed:0.01"
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    assert list(rows[0]) == CSV_COLUMNS
    assert len(rows) == 10 and float(rows[3]["std"]) == 0.01


SMALL_PROBE = "input 64x1x1\n" + "fc 64\nact relu\n" * 4 + "softmax 64"


def test_probe_he_forward_near_one():
    report = monte_carlo_probe(parse_spec(SMALL_PROBE), HeForward(), trials=20, batch=64)
    emp = report.column("emp_fwd")
    assert math.isnan(emp[0])
    assert np.all((emp[1:] > 0.8) & (emp[1:] < 1.25))


def test_probe_xavier_identity_near_one():
    spec = parse_spec("input 128x1x1\n" + "fc 128\nact identity\n" * 4 + "softmax 128")
    report = monte_carlo_probe(spec, Xavier(), trials=20, batch=128)
    assert np.all(np.abs(report.column("emp_fwd")[1:] - 1) < 0.1)
    assert np.all(np.abs(report.column("emp_bwd") - 1) < 0.1)


def test_probe_deterministic_and_csv():
    spec = parse_spec(SMALL_PROBE)
    a = monte_carlo_probe(spec, Xavier(), trials=3, batch=8, seed=4).to_csv()
    b = monte_carlo_probe(spec, Xavier(), trials=3, batch=8, seed=4).to_csv()
    assert a == b
    assert a.splitlines()[0].endswith("emp_fwd,emp_bwd,trials")


def test_probe_rejects_zero_trials():
    with pytest.raises(ValueError):
        monte_carlo_probe(parse_spec(SMALL_PROBE), HeForward(), trials=0)


@pytest.fixture
def weights(rng):
    return {"1.W": rng.normal(size=(4, 3)), "3.W": rng.normal(size=(2, 4)), "1.b": np.zeros(4)}


def test_pure_decay_is_diminishing(weights):
    lam = 0.0005
    hist = [{k: lam * w for k, w in weights.items()} for _ in range(60)]
    assert stall_diagnostic(hist, weights, lam) == "diminishing"


def test_dominant_loss_gradient_is_healthy(weights):
    lam = 0.0005
    hist = [{k: 10 * lam * w for k, w in weights.items()} for _ in range(60)]
    assert stall_diagnostic(hist, weights, lam) == "healthy"
    assert np.allclose(decay_ratios(hist, weights, lam), 9.0)


def test_only_trailing_window_matters():
    hist = [(1.0, 1.0)] * 10 + [(1e-6, 1.0)] * 50
    assert stall_diagnostic(hist, weight_decay=0.0005) == "diminishing"
    assert stall_diagnostic(hist + [(1.0, 1.0)], weight_decay=0.0005) == "healthy"


def test_zero_decay_uses_reference_scale():
    w = 1.0
    tiny = 0.01 * REFERENCE_DECAY * w
    assert stall_diagnostic([(tiny, w)] * 5, weight_decay=0.0) == "diminishing"
    assert stall_diagnostic([(REFERENCE_DECAY * w, w)] * 5, weight_decay=0.0) == "healthy"


def test_stall_needs_two_steps():
    with pytest.raises(ValueError):
        stall_diagnostic([(1.0, 1.0)])
