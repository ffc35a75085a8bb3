import pytest

from rectinit.model import (Activation, Conv, Fc, MaxPool, SpecError, count_extra_slope_params,
                            load_spec, parse_spec)

MINIMAL = "input 1x8x8\nfc 10\nact relu\nsoftmax 10\n"


def test_minimal_spec():
    spec = parse_spec(MINIMAL)
    assert spec.depth == 1
    assert spec.input_shape == (1, 8, 8)
    assert spec.layers[1] == Fc(10, in_units=64)


def test_two_weighted_layers():
    spec = parse_spec("input 1x8x8\nfc 16\nact relu\nfc 10\nsoftmax 10")
    assert spec.depth == 2


def test_comments_blank_lines_and_spaced_input():
    spec = parse_spec("# header\n\ninput 3 x 4 x 4   # rgb\nconv 3x3 2 stride 1 pad same\nfc 2\nsoftmax 2\n")
    assert spec.shapes[0] == (3, 4, 4)
    assert spec.shapes[1] == (2, 4, 4)


def test_table1_model_depth():
    spec = load_spec("table1-small")
    assert spec.depth == 14
    convs = [l for l in spec.weighted_layers() if isinstance(l, Conv)]
    assert [c.filters for c in convs] == [64] + [128] * 4 + [256] * 6
    assert convs[0].k == 7 and convs[0].stride == 2


def test_conv_shapes_same_and_valid():
    spec = parse_spec("input 1x7x7\nconv 2x2 3 stride 2 pad same\nconv 3x3 4\nfc 2\nsoftmax 2")
    assert spec.shapes[1] == (3, 4, 4)
    assert spec.shapes[2] == (4, 2, 2)


def test_channel_mismatch_declared():
    with pytest.raises(SpecError, match="channel mismatch") as exc:
        parse_spec("input 3x8x8\nconv 3x3 16 pad same\nconv 3x3x8 16\nfc 2\nsoftmax 2")
    assert exc.value.line == 3


def test_conv_after_fc_is_channel_mismatch():
    with pytest.raises(SpecError, match="channel mismatch"):
        parse_spec("input 3x8x8\nfc 16\nconv 3x3 4\nfc 2\nsoftmax 2")


@pytest.mark.parametrize("text, message", [
    ("input 1x2x2\nbogus 3\nsoftmax 4", "unknown layer keyword"),
    ("input 1x2x2\nfc 3\nsoftmax 4", "receives 3"),
    ("fc 3\nsoftmax 3", "begin with an input"),
    ("input 1x2x2\nfc 3", "end with a softmax"),
    ("input 1x2x2\ndropout 1.0\nfc 2\nsoftmax 2", "dropout rate"),
    ("input 1x2x2\nconv 3x3 2\nfc 2\nsoftmax 2", "does not fit"),
    ("input 1x2x2\nact tanh\nfc 2\nsoftmax 2", "unknown activation"),
    ("input 1x2x2\nconv 3x2 2\nfc 2\nsoftmax 2", "square window"),
    ("input 1x4x4\nconv 2x2 2 stride 0\nfc 2\nsoftmax 2", "stride"),
    ("input 1x4x4\nconv 2x2 2 pad full\nfc 2\nsoftmax 2", "pad"),
])
def test_rejections_are_line_numbered(text, message):
    with pytest.raises(SpecError, match=message) as exc:
        parse_spec(text)
    assert "line" in str(exc.value)


def test_activation_kinds_parse():
    spec = parse_spec("input 4x1x1\nact lrelu 0.01\nact prelu 0.25\nact prelu_shared 0.3\n"
                      "act identity\nfc 2\nsoftmax 2")
    assert spec.layers[1:5] == [Activation("lrelu", 0.01), Activation("prelu", 0.25),
                                Activation("prelu_shared", 0.3), Activation("identity")]


def test_std_override_and_maxpool_default_stride():
    spec = parse_spec("input 1x4x4\nconv 1x1 2 std 0.01\nmaxpool 2x2\nfc 3 std 0.001\nsoftmax 3")
    assert spec.layers[1].std == 0.01 and spec.layers[3].std == 0.001
    assert spec.layers[2] == MaxPool(2, 2)


def test_round_trip_text():
    spec = load_spec("gradcheck-small")
    again = parse_spec(spec.to_text())
    assert again.layers == spec.layers and again.shapes == spec.shapes


def test_with_activation():
    spec = load_spec("mlp-14").with_activation(Activation("prelu", 0.25))
    assert all(spec.layers[i] == Activation("prelu", 0.25) for i in spec.activation_indices)


def test_slope_count_table1():
    spec = load_spec("table1-small")
    assert count_extra_slope_params(spec, "shared") == 13
    assert count_extra_slope_params(spec, "channel-wise") == 64 + 4 * 128 + 6 * 256 + 4096 + 4096
    assert count_extra_slope_params(spec) == 13


def test_slope_count_relu_only():
    assert count_extra_slope_params(load_spec("mlp-30"), "shared") == 0
    assert count_extra_slope_params(load_spec("mlp-30"), "channel-wise") == 0
