import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ganforge.autodiff import (
    DimensionError,
    Tape,
    Tensor,
    activation,
    backward,
    batch_norm,
    conv2d,
    conv2d_transpose,
    grad,
    grad_check,
    leaky_relu,
    tanh,
)
from ganforge.autodiff import io as gio
from ganforge.autodiff import tensor as T


def naive_conv(x, w, s, p):
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    ho = (h + 2 * p - k) // s + 1
    wo = (wd + 2 * p - k) // s + 1
    out = np.zeros((n, o, ho, wo))
    for b in range(n):
        for oc in range(o):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for ic in range(c):
                        for u in range(k):
                            for v in range(k):
                                r, q = i * s - p + u, j * s - p + v
                                if 0 <= r < h and 0 <= q < wd:
                                    acc += x[b, ic, r, q] * w[oc, ic, u, v]
                    out[b, oc, i, j] = acc
    return out


def test_conv_scaling_identity():
    out = conv2d(np.ones((1, 1, 3, 3)), np.array([[[[2.0]]]]), 1, 0)
    assert out.shape == (1, 1, 3, 3)
    assert np.all(out.data == 2.0)


def test_conv_table_shape():
    x = np.zeros((1, 3, 64, 64))
    w = np.zeros((64, 3, 4, 4))
    assert conv2d(x, w, 2, 1).shape == (1, 64, 32, 32)


@pytest.mark.parametrize("method", ["im2col", "loops"])
def test_conv_matches_naive_loops(method):
    rng = np.random.default_rng(3)
    x = rng.standard_normal((1, 2, 5, 5))
    w = rng.standard_normal((3, 2, 3, 3))
    got = conv2d(x, w, 2, 1, method=method).data
    np.testing.assert_allclose(got, naive_conv(x, w, 2, 1), rtol=0, atol=1e-12)


def test_conv_methods_agree():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((2, 3, 16, 16))
    w = rng.standard_normal((5, 3, 4, 4))
    a = conv2d(x, w, 2, 1, method="im2col").data
    b = conv2d(x, w, 2, 1, method="loops").data
    assert np.max(np.abs(a - b)) < 1e-12


def test_conv_shape_errors_name_axes():
    with pytest.raises(DimensionError, match="axis 1"):
        conv2d(np.zeros((1, 2, 5, 5)), np.zeros((1, 3, 3, 3)))
    with pytest.raises(DimensionError):
        conv2d(np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 4, 4)))


def test_conv_transpose_shapes():
    x = np.zeros((1, 512, 4, 4))
    w = np.zeros((512, 256, 4, 4))
    assert conv2d_transpose(x, w, 2, 1).shape == (1, 256, 8, 8)
    out = conv2d_transpose(np.ones((1, 1, 1, 1)), np.ones((1, 1, 2, 2)), 1, 0)
    assert out.shape == (1, 1, 2, 2)
    assert np.all(out.data == 1.0)


def test_conv_transpose_is_brute_force_adjoint():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((2, 3, 6, 6))
    w = rng.standard_normal((4, 3, 3, 3))
    y = rng.standard_normal((2, 4, 3, 3))
    # Build the dense matrix of conv2d column by column, then apply its transpose.
    cols = []
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = 1.0
        cols.append(naive_conv(e.reshape(x.shape), w, 2, 1).reshape(-1))
    dense = np.stack(cols, axis=1)
    expected = (dense.T @ y.reshape(-1)).reshape(x.shape)
    got = conv2d_transpose(y, w, 2, 1, output_size=(6, 6)).data
    np.testing.assert_allclose(got, expected, rtol=0, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(1, 2),
    cin=st.integers(1, 3),
    cout=st.integers(1, 3),
    k=st.integers(1, 4),
    s=st.integers(1, 3),
    p=st.integers(0, 2),
    h=st.integers(4, 9),
    seed=st.integers(0, 2**16),
)
def test_adjoint_identity(n, cin, cout, k, s, p, h, seed):
    if p >= k:
        p = k - 1
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, cin, h, h))
    w = rng.standard_normal((cout, cin, k, k))
    out = conv2d(x, w, s, p)
    y = rng.standard_normal(out.shape)
    lhs = np.sum(out.data * y)
    rhs = np.sum(x * conv2d_transpose(y, w, s, p, output_size=(h, h)).data)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_batchnorm_standardized_input():
    x = np.array([-1.0, 1.0, -1.0, 1.0]).reshape(4, 1, 1, 1)
    out = batch_norm(x, np.ones(1), np.zeros(1), training=True, eps=1e-5).data
    np.testing.assert_allclose(out, x / np.sqrt(1 + 1e-5), rtol=0, atol=1e-15)


def test_batchnorm_constant_channel_collapses_to_beta():
    x = np.full((3, 1, 2, 2), 0.7)
    out = batch_norm(x, np.ones(1), np.array([5.0]), training=True).data
    np.testing.assert_allclose(out, 5.0, rtol=0, atol=1e-9)


def test_batchnorm_two_pass_oracle():
    rng = np.random.default_rng(6)
    x = rng.standard_normal((4, 2, 3, 3))
    gamma, beta = rng.standard_normal(2), rng.standard_normal(2)
    expected = np.empty_like(x)
    for c in range(2):
        vals = x[:, c].reshape(-1)
        m = sum(vals) / len(vals)
        v = sum((a - m) ** 2 for a in vals) / len(vals)
        expected[:, c] = (x[:, c] - m) / np.sqrt(v + 1e-5) * gamma[c] + beta[c]
    got = batch_norm(x, gamma, beta, training=True).data
    np.testing.assert_allclose(got, expected, rtol=0, atol=1e-12)


def test_batchnorm_running_stats_and_eval():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((8, 2, 2, 2)) * 3 + 1
    rm, rv = np.zeros(2), np.ones(2)
    batch_norm(x, np.ones(2), np.zeros(2), rm, rv, training=True)
    np.testing.assert_allclose(rm, 0.1 * x.mean(axis=(0, 2, 3)))
    np.testing.assert_allclose(rv, 0.9 + 0.1 * x.var(axis=(0, 2, 3), ddof=1))
    out = batch_norm(x, np.ones(2), np.zeros(2), rm, rv, training=False).data
    np.testing.assert_allclose(out, (x - rm.reshape(1, 2, 1, 1)) / np.sqrt(rv.reshape(1, 2, 1, 1) + 1e-5))


def test_batchnorm_rejects_single_value():
    with pytest.raises(ValueError):
        batch_norm(np.zeros((1, 1, 1, 1)), np.ones(1), np.zeros(1), training=True)


def test_activations():
    assert list(activation("relu", np.array([-2.0, 0.0, 3.0])).data) == [0.0, 0.0, 3.0]
    assert activation("sigmoid", np.array([0.0])).data[0] == 0.5
    assert activation("leaky_relu", np.array([-5.0]), slope=0.2).data[0] == pytest.approx(-1.0, abs=1e-15)
    out = activation("tanh", np.linspace(-50, 50, 11)).data
    assert out.min() >= -1 and out.max() <= 1
    with pytest.raises(ValueError):
        leaky_relu(np.zeros(1), 1.5)


def test_backward_sum_and_tanh():
    x = Tensor(np.zeros(3), requires_grad=True)
    backward(x.sum())
    assert list(x.grad) == [1.0, 1.0, 1.0]
    x = Tensor(np.zeros(3), requires_grad=True)
    backward(tanh(x).sum())
    assert list(x.grad) == [1.0, 1.0, 1.0]


def test_backward_untouched_leaf_gets_zero_and_nonscalar_rejected():
    x = Tensor(np.ones(2), requires_grad=True)
    y = Tensor(np.ones(2), requires_grad=True)
    backward(x.sum(), [x, y])
    assert np.all(y.grad == 0)
    with pytest.raises(ValueError):
        backward(x * 2)


def test_tape_order_and_single_visit():
    x = Tensor(np.ones(2), requires_grad=True)
    a = x * 2
    b = a + x
    c = (a * b).sum()
    tape = Tape([c])
    seqs = [n.seq for n in tape.nodes]
    assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs) == 4
    for t in tape.tensors:
        for inp in t.node.inputs:
            if inp.node is not None:
                assert inp.node.seq < t.node.seq


def test_composite_graph_finite_differences():
    rng = np.random.default_rng(8)
    w = Tensor(rng.standard_normal((3, 2, 3, 3)), requires_grad=True)
    gamma, beta = Tensor(rng.standard_normal(3), requires_grad=True), Tensor(rng.standard_normal(3), requires_grad=True)
    proj = rng.standard_normal((2, 3, 3, 3))

    def build(x):
        h = conv2d(x, w, 2, 1)
        h = batch_norm(h, gamma, beta, training=True)
        return (leaky_relu(h, 0.2) * proj).sum()

    x = Tensor(rng.standard_normal((2, 2, 6, 6)))
    assert grad_check(build, x, 1e-5) < 1e-4
    assert grad_check(lambda _: build(x), w, 1e-5) < 1e-4
    assert grad_check(lambda _: build(x), gamma, 1e-5) < 1e-4


def test_grad_check_linear_exact():
    a = np.arange(1.0, 6.0)
    assert grad_check(lambda x: (x * a).sum(), Tensor(np.zeros(5)), 1e-3) < 1e-10


def test_second_order_through_conv():
    # d/dw of ||d(sum(conv(x, w) * r))/dx||^2 against finite differences.
    rng = np.random.default_rng(9)
    x0 = rng.standard_normal((1, 2, 5, 5))
    r = rng.standard_normal((1, 3, 3, 3))
    w = Tensor(rng.standard_normal((3, 2, 3, 3)), requires_grad=True)

    def build(_):
        x = Tensor(x0, requires_grad=True)
        out = leaky_relu(conv2d(x, w, 2, 1), 0.2)
        (gx,) = grad((out * r).sum(), [x], create_graph=True)
        return (gx * gx).sum()

    assert grad_check(build, w, 1e-5) < 1e-6


def test_gft1_round_trip(tmp_path):
    arr = np.random.default_rng(1).standard_normal((2, 3, 4))
    path = tmp_path / "t.gft"
    gio.save_tensor(path, arr)
    raw = path.read_bytes()
    assert raw[:4] == b"GFT1"
    assert int.from_bytes(raw[4:8], "little") == 3
    assert len(raw) == 4 + 4 + 12 + 8 * arr.size
    np.testing.assert_array_equal(gio.load_tensor(path), arr)
    with pytest.raises(gio.FormatError):
        gio.read_block(io.BytesIO(b"XXXX"))


def test_determinism_bit_identical():
    rng = np.random.default_rng(11)
    x, w = rng.standard_normal((2, 3, 8, 8)), rng.standard_normal((4, 3, 4, 4))
    a = conv2d(x, w, 2, 1).data
    b = conv2d(x.copy(), w.copy(), 2, 1).data
    assert a.tobytes() == b.tobytes()


def test_logsumexp_gradient():
    rng = np.random.default_rng(12)
    x = Tensor(rng.standard_normal((3, 4)))
    assert grad_check(lambda t: (T.log_softmax(t, 1) * np.arange(12.0).reshape(3, 4)).sum(), x) < 1e-7


def test_grad_check_kink_retry():
    # leaky ReLU probed 4e-6 from its kink: a 1e-5 central difference straddles it
    x = Tensor(np.array([4e-6]))
    build = lambda t: leaky_relu(t, 0.2).sum()  # noqa: E731
    assert grad_check(build, x, 1e-5) > 0.2
    assert grad_check(build, x, 1e-5, kink_retries=1) < 1e-9
    smooth = lambda t: (tanh(t) * 3).sum()  # noqa: E731
    y = Tensor(np.array([0.3, -1.2]))
    assert grad_check(smooth, y, 1e-5, kink_retries=2) == grad_check(smooth, y, 1e-5)
