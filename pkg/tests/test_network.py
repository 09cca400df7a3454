import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import mat_bytes, random_weights_dict
from oracles import conv2d_loops
from iclabel_engine.matreader import parse_mat
from iclabel_engine.network import (
    ARCHITECTURE,
    FeatureBatch,
    MissingLayer,
    NetworkWeights,
    NonFinite,
    OutOfRange,
    ShapeMismatch,
    conv2d,
    forward,
    infer_augmented,
    leaky_relu,
    load_weights,
    out_extent,
    softmax7,
)


def random_batch(rng, n):
    return FeatureBatch(
        rng.uniform(-1, 1, (n, 1, 32, 32)),
        rng.uniform(-1, 1, (n, 1, 1, 100)),
        rng.uniform(-1, 1, (n, 1, 1, 100)),
    )


def zero_weights():
    return NetworkWeights(
        {s.name: np.zeros(s.weight_shape) for s in ARCHITECTURE},
        {s.name: np.zeros(s.out_channels) for s in ARCHITECTURE},
    )


def test_fingerprint():
    topo = [s for s in ARCHITECTURE if s.name.startswith("Topo")]
    assert [s.out_channels for s in topo] == [128, 256, 512]
    assert all(s.kernel == (4, 4) and s.stride == 2 and s.padding == (1, 1) for s in topo)
    for branch in ("PSD", "ACF"):
        specs = [s for s in ARCHITECTURE if s.name.startswith(branch)]
        assert [s.out_channels for s in specs] == [128, 256, 1]
        assert all(s.kernel == (1, 3) and s.stride == 1 and s.padding == (0, 1) for s in specs)
    d = ARCHITECTURE[-1]
    assert (d.name, d.in_channels, d.out_channels, d.kernel, d.stride, d.padding) == (
        "Discr", 712, 7, (4, 4), 1, (0, 0)
    )
    assert not d.followed_by_lrelu
    assert all(s.followed_by_lrelu for s in ARCHITECTURE[:-1])


def test_shape_chain():
    n = 32
    for _ in range(3):
        n = out_extent(n, 4, 2, 1)
    assert n == 4
    assert out_extent(100, 3, 1, 1) == 100
    assert out_extent(4, 4, 1, 0) == 1


def test_zero_weights_file_loads():
    d = {k: np.zeros_like(v) for k, v in random_weights_dict().items()}
    w = load_weights(parse_mat(mat_bytes(d)))
    assert w.kernels["PSD1"].shape == (128, 1, 1, 3)
    assert w.kernels["PSD3"].shape == (1, 256, 1, 3)


def test_missing_layer():
    d = random_weights_dict()
    del d["Discr_bias"]
    with pytest.raises(MissingLayer):
        load_weights(parse_mat(mat_bytes(d)))


def test_wrong_shape_and_nonfinite():
    d = random_weights_dict()
    d["Topo2_weight"] = d["Topo2_weight"][:, :100]
    with pytest.raises(ShapeMismatch):
        load_weights(parse_mat(mat_bytes(d)))
    d = random_weights_dict()
    d["ACF1_bias"] = d["ACF1_bias"][:5]
    with pytest.raises(ShapeMismatch):
        load_weights(parse_mat(mat_bytes(d)))
    d = random_weights_dict()
    d["PSD2_weight"][0, 0, 0, 0] = np.nan
    with pytest.raises(NonFinite):
        load_weights(parse_mat(mat_bytes(d)))


def test_batch_validation():
    rng = np.random.default_rng(0)
    b = random_batch(rng, 2)
    with pytest.raises(ShapeMismatch):
        FeatureBatch(b.topo, b.psd[:1], b.acf)
    with pytest.raises(ShapeMismatch):
        FeatureBatch(b.topo, b.psd.reshape(2, 1, 100, 1), b.acf)
    bad = b.acf.copy()
    bad[0, 0, 0, 3] = np.inf
    with pytest.raises(NonFinite):
        FeatureBatch(b.topo, b.psd, bad)
    with pytest.raises(OutOfRange):
        FeatureBatch(2 * b.topo, b.psd, b.acf)


def test_zero_weights_give_zero_logits():
    rng = np.random.default_rng(1)
    batch = random_batch(rng, 3)
    assert np.all(forward(zero_weights(), batch) == 0.0)
    np.testing.assert_allclose(infer_augmented(zero_weights(), batch), 1 / 7, atol=1e-12)


def test_single_conv_matches_loops():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((2, 1, 9, 9))
    w = rng.standard_normal((1, 1, 4, 4))
    b = rng.standard_normal(1)
    np.testing.assert_allclose(conv2d(x, w, b, 1, (0, 0)), conv2d_loops(x, w, b, 1, (0, 0)), atol=1e-10)


@settings(max_examples=100, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    n=st.integers(1, 2),
    c=st.integers(1, 3),
    co=st.integers(1, 3),
    h=st.integers(4, 8),
    wd=st.integers(4, 8),
    kh=st.integers(1, 4),
    kw=st.integers(1, 4),
    stride=st.integers(1, 2),
    ph=st.integers(0, 1),
    pw=st.integers(0, 1),
)
def test_conv_matches_loops_random_shapes(seed, n, c, co, h, wd, kh, kw, stride, ph, pw):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, c, h, wd))
    w = rng.standard_normal((co, c, kh, kw))
    b = rng.standard_normal(co)
    np.testing.assert_allclose(
        conv2d(x, w, b, stride, (ph, pw)), conv2d_loops(x, w, b, stride, (ph, pw)), rtol=0, atol=1e-10
    )


def test_conv_is_cross_correlation():
    x = np.zeros((1, 1, 3, 3))
    x[0, 0, 0, 0] = 1.0
    w = np.arange(4.0).reshape(1, 1, 2, 2)
    # a unit impulse at the top-left picks the top-left kernel tap (no flip)
    assert conv2d(x, w, np.zeros(1), 1, (0, 0))[0, 0, 0, 0] == 0.0
    x[0, 0, 0, 0], x[0, 0, 1, 1] = 0.0, 1.0
    assert conv2d(x, w, np.zeros(1), 1, (0, 0))[0, 0, 0, 0] == 3.0


def test_leaky_relu():
    np.testing.assert_array_equal(leaky_relu(np.array([-1.0, 0.0, 2.0])), [-0.2, 0.0, 2.0])


def test_softmax_examples():
    np.testing.assert_allclose(softmax7(np.zeros((1, 7))), 1 / 7, atol=1e-12)
    z = np.log([[1, 2, 4, 1, 1, 1, 1]], dtype=float)
    np.testing.assert_allclose(softmax7(z), np.array([[1, 2, 4, 1, 1, 1, 1]]) / 11, atol=1e-15)
    rng = np.random.default_rng(3)
    row = rng.standard_normal((1, 7))
    np.testing.assert_allclose(softmax7(row + 123.4), softmax7(row), atol=1e-12)
    assert np.all(np.isfinite(softmax7(np.array([[1e4, 0, 0, 0, 0, 0, -1e4]]))))


def test_rows_sum_to_one(weights):
    rng = np.random.default_rng(4)
    p = infer_augmented(weights, random_batch(rng, 5))
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-6)
    assert np.all((p >= 0) & (p <= 1))


def test_batch_independence(weights):
    rng = np.random.default_rng(5)
    batch = random_batch(rng, 4)
    whole = forward(weights, batch)
    parts = np.concatenate([forward(weights, batch.take([i])) for i in range(4)])
    np.testing.assert_allclose(whole, parts, rtol=0, atol=1e-10)


def test_augmentation_symmetric_topo(weights):
    rng = np.random.default_rng(6)
    b = random_batch(rng, 2)
    half = b.topo[..., :16]
    sym = np.concatenate([half, half[..., ::-1]], axis=-1)
    batch = FeatureBatch(sym, b.psd, b.acf)
    two = (softmax7(forward(weights, batch)) + softmax7(forward(weights, FeatureBatch(-sym, b.psd, b.acf)))) / 2
    np.testing.assert_allclose(infer_augmented(weights, batch), two, atol=1e-12)


def test_augmentation_invariant_to_variant_choice(weights):
    # the four variants form a group, so feeding any of them gives the same answer
    rng = np.random.default_rng(7)
    b = random_batch(rng, 2)
    ref = infer_augmented(weights, b)
    for t in (-b.topo, b.topo[..., ::-1], -b.topo[..., ::-1]):
        got = infer_augmented(weights, FeatureBatch(np.ascontiguousarray(t), b.psd, b.acf))
        np.testing.assert_allclose(got, ref, atol=1e-12)


def test_discr_sees_tiled_vectors():
    # with only Discr bias nonzero the logits equal that bias
    w = zero_weights()
    w.biases["Discr"][:] = np.log([1, 2, 3, 4, 5, 6, 7])
    p = softmax7(forward(w, random_batch(np.random.default_rng(8), 1)))
    np.testing.assert_allclose(p[0], np.arange(1, 8) / 28, atol=1e-12)
    assert math.isclose(p.sum(), 1.0)
