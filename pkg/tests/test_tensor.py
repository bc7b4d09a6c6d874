import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lytnet.errors import ConfigurationError, ValidationError
from lytnet.tensor import (
    ConvParams,
    as_tensor,
    conv2d,
    depthwise_conv2d,
    fully_connected,
    global_avgpool,
    hard_sigmoid,
    hard_swish,
    maxpool2x2,
    naive_conv2d,
    relu,
    relu6,
    softmax,
)
from oracles import brute_avgpool, brute_fc, brute_maxpool, random_conv_case, rel_err


def test_as_tensor_rejects_bad_input():
    with pytest.raises(ValidationError):
        as_tensor(np.zeros((2, 2)))
    with pytest.raises(ValidationError):
        as_tensor(np.zeros((0, 2, 2)))
    with pytest.raises(ValidationError):
        as_tensor(np.array([[[np.nan]]]))


def test_conv_scalar_product():
    p = ConvParams(np.array([[[[3.0]]]]), bias=[0.0], scale=[1.0], shift=[0.0])
    assert conv2d(np.array([[[2.0]]]), p).tolist() == [[[6.0]]]


def test_conv_identity_kernel(rng):
    x = rng.standard_normal((1, 5, 7)).astype(np.float32)
    p = ConvParams(np.ones((1, 1, 1, 1)))
    np.testing.assert_array_equal(conv2d(x, p), x)


def test_conv_matches_naive_on_spec_case(rng):
    x = rng.standard_normal((3, 8, 8)).astype(np.float32)
    p = ConvParams(rng.standard_normal((4, 3, 3, 3)), stride=2, bias=rng.standard_normal(4))
    out = conv2d(x, p)
    assert out.shape == (4, 4, 4)
    assert rel_err(out, naive_conv2d(x, p)) < 1e-5


def test_conv_channel_mismatch():
    p = ConvParams(np.ones((2, 3, 1, 1)))
    with pytest.raises(ConfigurationError):
        conv2d(np.ones((2, 4, 4)), p)


def test_conv_rejects_nonfinite_weights():
    with pytest.raises(ValidationError):
        ConvParams(np.full((1, 1, 1, 1), np.inf))


@pytest.mark.parametrize("stride", [3, 0])
def test_conv_rejects_bad_stride(stride):
    with pytest.raises(ConfigurationError):
        ConvParams(np.ones((1, 1, 3, 3)), stride=stride)


def test_conv_zero_input_gives_bias_pattern():
    p = ConvParams(np.ones((2, 1, 3, 3)), bias=[1.0, 2.0], scale=[2.0, 3.0], shift=[0.5, -1.0])
    out = naive_conv2d(np.zeros((1, 3, 3)), p)
    np.testing.assert_array_equal(out[0], np.full((3, 3), 2.5))
    np.testing.assert_array_equal(out[1], np.full((3, 3), 5.0))
    np.testing.assert_array_equal(conv2d(np.zeros((1, 3, 3)), p), out)


@pytest.mark.parametrize("h,w", [(1, 1), (5, 7), (8, 8), (9, 4)])
@pytest.mark.parametrize("k", [1, 3, 5])
def test_stride_two_output_is_ceil_half(h, w, k):
    p = ConvParams(np.ones((1, 1, k, k)), stride=2)
    assert conv2d(np.ones((1, h, w)), p).shape == (1, math.ceil(h / 2), math.ceil(w / 2))
    dw = ConvParams(np.ones((1, 1, k, k)), stride=2, depthwise=True)
    assert depthwise_conv2d(np.ones((1, h, w)), dw).shape == (1, math.ceil(h / 2), math.ceil(w / 2))


def test_depthwise_channel_isolation(rng):
    x = rng.standard_normal((2, 6, 6)).astype(np.float32)
    wts = rng.standard_normal((2, 1, 3, 3)).astype(np.float32)
    wts[0] = 0
    out = depthwise_conv2d(x, ConvParams(wts, depthwise=True))
    assert np.all(out[0] == 0)


def test_depthwise_identity(rng):
    x = rng.standard_normal((3, 5, 5)).astype(np.float32)
    wts = np.zeros((3, 1, 3, 3), dtype=np.float32)
    wts[:, 0, 1, 1] = 1
    np.testing.assert_array_equal(depthwise_conv2d(x, ConvParams(wts, depthwise=True)), x)


def test_depthwise_matches_block_diagonal_dense(rng):
    x = rng.standard_normal((8, 16, 16)).astype(np.float32)
    dw = rng.standard_normal((8, 1, 5, 5)).astype(np.float32)
    dense = np.zeros((8, 8, 5, 5), dtype=np.float32)
    for i in range(8):
        dense[i, i] = dw[i, 0]
    got = depthwise_conv2d(x, ConvParams(dw, depthwise=True))
    want = conv2d(x, ConvParams(dense))
    assert rel_err(got, want) < 1e-5


def test_depthwise_requires_matching_channels():
    with pytest.raises(ConfigurationError):
        ConvParams(np.ones((2, 2, 3, 3)), depthwise=True)
    with pytest.raises(ConfigurationError):
        depthwise_conv2d(np.ones((1, 3, 3)), ConvParams(np.ones((1, 1, 3, 3))))
    with pytest.raises(ConfigurationError):
        depthwise_conv2d(np.ones((3, 3, 3)), ConvParams(np.ones((2, 1, 3, 3)), depthwise=True))


def test_depthwise_perturbing_other_channel_changes_nothing(rng):
    x = rng.standard_normal((4, 7, 7)).astype(np.float32)
    p = ConvParams(rng.standard_normal((4, 1, 3, 3)), stride=2, depthwise=True)
    base = depthwise_conv2d(x, p)
    x2 = x.copy()
    x2[2] += rng.standard_normal((7, 7)).astype(np.float32)
    out = depthwise_conv2d(x2, p)
    for c in (0, 1, 3):
        np.testing.assert_array_equal(out[c], base[c])


@pytest.mark.parametrize("depthwise", [False, True])
def test_conv_matches_naive_randomized(depthwise):
    rng = np.random.default_rng(99 + depthwise)
    for _ in range(50):
        x, p = random_conv_case(rng, depthwise=depthwise)
        got = conv2d(x, p)
        want = naive_conv2d(x, p)
        assert got.shape == want.shape
        assert rel_err(got, want) < 1e-5


def test_conv_is_deterministic(rng):
    x, p = random_conv_case(rng, max_c=6, max_hw=12)
    assert conv2d(x, p).tobytes() == conv2d(x, p).tobytes()


def test_maxpool_window():
    assert maxpool2x2(np.array([[[1, 2], [3, 4]]])).tolist() == [[[4.0]]]


def test_maxpool_constant():
    out = maxpool2x2(np.full((2, 4, 6), 1.5))
    assert out.shape == (2, 2, 3) and np.all(out == 1.5)


def test_maxpool_odd_dims_rejected():
    with pytest.raises(ValidationError):
        maxpool2x2(np.ones((1, 3, 4)))


def test_maxpool_matches_brute_force_at_network_size():
    x = np.random.default_rng(5).standard_normal((16, 384, 288)).astype(np.float32)
    got = maxpool2x2(x)
    assert got.shape == (16, 192, 144)
    # brute force over a slice keeps the loop oracle quick
    np.testing.assert_array_equal(got[:2], brute_maxpool(x[:2]))
    np.testing.assert_array_equal(got, x.reshape(16, 192, 2, 144, 2).max(axis=(2, 4)))


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_maxpool_monotone(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((2, 4, 4)).astype(np.float32)
    b = a + rng.uniform(0, 1, a.shape).astype(np.float32)
    assert np.all(maxpool2x2(b) >= maxpool2x2(a))


def test_avgpool_values(rng):
    assert global_avgpool(np.array([[[1, 2], [3, 4]]])).tolist() == [[[2.5]]]
    assert np.allclose(global_avgpool(np.full((3, 5, 5), 7.0)), 7.0)
    x = rng.standard_normal((960, 12, 9)).astype(np.float32)
    got = global_avgpool(x)
    assert got.shape == (960, 1, 1)
    assert np.max(np.abs(got - brute_avgpool(x))) < 1e-6


def test_activation_breakpoints():
    assert hard_swish(np.array([0.0, 3.0, -3.0])).tolist() == [0.0, 3.0, 0.0]
    assert relu(np.array([-1.0, 2.0])).tolist() == [0.0, 2.0]
    assert hard_sigmoid(np.array([0.0, 3.0, 10.0, -3.0, -9.0])).tolist() == [0.5, 1.0, 1.0, 0.0, 0.0]
    assert relu6(np.array([-1.0, 7.0, 2.0])).tolist() == [0.0, 6.0, 2.0]


def test_hard_swish_formula(rng):
    x = rng.uniform(-8, 8, 200).astype(np.float32)
    want = x * np.clip(x + 3, 0, 6) / 6
    np.testing.assert_allclose(hard_swish(x), want, rtol=1e-6, atol=1e-7)


def test_fully_connected(rng):
    x = rng.standard_normal(5).astype(np.float32)
    np.testing.assert_array_equal(fully_connected(x, np.eye(5), np.zeros(5)), x)
    b = rng.standard_normal(3)
    np.testing.assert_allclose(fully_connected(np.zeros(4), np.ones((3, 4)), b), b, rtol=1e-6)
    v = rng.standard_normal(1280).astype(np.float32)
    wts = rng.standard_normal((9, 1280)).astype(np.float32)
    bias = rng.standard_normal(9).astype(np.float32)
    assert rel_err(fully_connected(v, wts, bias), brute_fc(v, wts, bias)) < 1e-5


def test_fully_connected_mismatch():
    with pytest.raises(ConfigurationError):
        fully_connected(np.ones(3), np.ones((2, 4)))
    with pytest.raises(ConfigurationError):
        fully_connected(np.ones(4), np.ones((2, 4)), np.ones(3))


def test_softmax():
    np.testing.assert_allclose(softmax(np.zeros(5)), [0.2] * 5, rtol=0, atol=1e-15)
    z = np.array([1.0, 2.0, 3.0])
    e = [math.exp(v) for v in z]
    np.testing.assert_allclose(softmax(z), [v / sum(e) for v in e], rtol=1e-12)
    with pytest.raises(ValidationError):
        softmax([])


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=8), st.floats(-1e3, 1e3))
def test_softmax_properties(logits, shift):
    p = softmax(logits)
    assert abs(p.sum() - 1) <= 1e-6
    assert np.all(p > 0) or max(logits) - min(logits) > 700
    np.testing.assert_allclose(softmax(np.array(logits) + shift), p, atol=1e-9)
