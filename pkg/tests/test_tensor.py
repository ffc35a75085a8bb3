import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rectinit.tensor import (NonFiniteError, RngStream, ShapeError, check_finite, matmul,
                             moments, sample_gaussian)


def test_zero_std_gives_constant():
    out = sample_gaussian([4], 3.5, 0.0, RngStream(0))
    assert out.tolist() == [3.5] * 4


def test_same_seed_same_values():
    a = sample_gaussian([3, 5], 0.0, 1.0, RngStream(42))
    b = sample_gaussian([3, 5], 0.0, 1.0, RngStream(42))
    assert a.tobytes() == b.tobytes()


def test_stream_advances():
    rng = RngStream(7)
    a = sample_gaussian([10], 0.0, 1.0, rng)
    b = sample_gaussian([10], 0.0, 1.0, rng)
    assert not np.array_equal(a, b)


def test_call_sequence_determinism():
    def seq(seed):
        rng = RngStream(seed)
        return b"".join(sample_gaussian([s], 0.0, 0.1, rng).tobytes() for s in (3, 7, 1))
    assert seq(11) == seq(11)


def test_empirical_std_of_table_value():
    t = sample_gaussian([100000], 0.0, 0.059, RngStream(3))
    assert 0.0585 <= np.sqrt(moments(t)[1]) <= 0.0595


@pytest.mark.parametrize("shape", [[], [0], [3, -1]])
def test_bad_shape(shape):
    with pytest.raises(ValueError):
        sample_gaussian(shape, 0.0, 1.0, RngStream(0))


def test_negative_std():
    with pytest.raises(ValueError):
        sample_gaussian([2], 0.0, -1.0, RngStream(0))


def test_matmul_identity_and_hand_values():
    m = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(matmul(np.eye(2), m), m)
    assert matmul(np.array([[1.0, 2.0]]), np.array([[3.0], [4.0]])).tolist() == [[11.0]]


def test_matmul_shape_error_names_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_matmul_associative(seed):
    g = np.random.default_rng(seed)
    a, b, c = (g.uniform(-1, 1, (8, 8)) for _ in range(3))
    left, right = matmul(matmul(a, b), c), matmul(a, matmul(b, c))
    assert np.allclose(left, right, rtol=1e-10, atol=1e-10 * np.abs(left).max())


def test_moments_hand_values():
    assert moments(np.array([5.0, 5.0, 5.0])) == (5.0, 0.0)
    assert moments(np.array([1.0, 2.0, 3.0, 4.0])) == (2.5, 1.25)


def test_moments_empty():
    with pytest.raises(ValueError):
        moments(np.array([]))


def test_moments_monte_carlo():
    _, var = moments(sample_gaussian([100000], 0.0, 1.0, RngStream(5)))
    assert 0.98 <= var <= 1.02


@pytest.mark.parametrize("std", [0.01, 0.5, 3.0])
def test_sampler_std_converges(std):
    t = sample_gaussian([100000], 1.0, std, RngStream(9))
    assert abs(np.sqrt(moments(t)[1]) - std) <= 0.02 * std


def test_check_finite():
    check_finite(np.ones(3))
    with pytest.raises(NonFiniteError):
        check_finite(np.array([1.0, np.nan]))
    with pytest.raises(NonFiniteError):
        check_finite(np.array([np.inf]))


def test_seed_range():
    with pytest.raises(ValueError):
        RngStream(-1)
    RngStream(2**64 - 1)
