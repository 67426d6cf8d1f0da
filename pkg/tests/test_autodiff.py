"""Core tensor library tests: naive-loop oracles, frozen values, gradient checks."""

import math

import numpy as np
import pytest

from hatr.autodiff import (
    BatchNormState,
    ConfigError,
    NonFiniteError,
    ShapeError,
    Tape,
    Tensor,
    add,
    add_scalar,
    avgpool_global,
    batchnorm2d,
    concat,
    conv2d,
    cross_entropy,
    embedding,
    fd_check,
    layernorm,
    linear,
    matmul,
    maxpool2d,
    mul,
    relu,
    repeat_rows,
    reshape,
    scale,
    sigmoid,
    softmax,
    sum_all,
    tanh,
    transpose2d,
)

# ---------------------------------------------------------------------------
# independent oracles (written before the ops they check; no shared code)


def matmul_oracle(a, b):
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            for l in range(k):
                out[i, j] += a[i, l] * b[l, j]
    return out


def conv2d_oracle(x, kernel, stride, padding):
    h, w, cin = x.shape
    kh, kw, _, cout = kernel.shape
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (w + 2 * padding - kw) // stride + 1
    out = np.zeros((oh, ow, cout))
    for oy in range(oh):
        for ox in range(ow):
            for oc in range(cout):
                s = 0.0
                for i in range(kh):
                    for j in range(kw):
                        y = oy * stride + i - padding
                        xx = ox * stride + j - padding
                        if 0 <= y < h and 0 <= xx < w:
                            for ic in range(cin):
                                s += x[y, xx, ic] * kernel[i, j, ic, oc]
                out[oy, ox, oc] = s
    return out


def softmax_oracle_1d(v):
    m = max(v)
    e = [math.exp(t - m) for t in v]
    z = sum(e)
    return [t / z for t in e]


def layernorm_oracle_1d(v, gain, bias, eps):
    mu = sum(v) / len(v)
    var = sum((t - mu) ** 2 for t in v) / len(v)
    return [(t - mu) / math.sqrt(var + eps) * g + b for t, g, b in zip(v, gain, bias)]


def cross_entropy_oracle(logits, targets, ignore_index):
    total, count = 0.0, 0
    for row, t in zip(logits, targets):
        if t == ignore_index:
            continue
        p = softmax_oracle_1d(list(row))
        total += -math.log(p[t])
        count += 1
    return total / count


# ---------------------------------------------------------------------------
# matmul


def test_matmul_identity():
    a = Tensor(np.eye(2))
    b = Tensor([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(matmul(a, b).data, b.data)


def test_matmul_zero():
    a = Tensor([[1.0, 2.0], [3.0, 4.0]])
    z = Tensor(np.zeros((2, 2)))
    assert np.array_equal(matmul(a, z).data, np.zeros((2, 2)))


def test_matmul_vs_triple_loop():
    rng = np.random.default_rng(42)
    a = rng.normal(size=(3, 4))
    b = rng.normal(size=(4, 2))
    got = matmul(Tensor(a), Tensor(b)).data
    assert np.allclose(got, matmul_oracle(a, b), atol=1e-10, rtol=0)


def test_matmul_random_sizes_vs_oracle():
    rng = np.random.default_rng(7)
    for _ in range(5):
        m, k, n = rng.integers(1, 17, size=3)
        a = rng.normal(size=(m, k))
        b = rng.normal(size=(k, n))
        assert np.allclose(matmul(Tensor(a), Tensor(b)).data, matmul_oracle(a, b), atol=1e-10)


def test_matmul_shape_mismatch_names_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
        matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))


# ---------------------------------------------------------------------------
# conv2d


def test_conv2d_1x1_identity():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(4, 5, 3))
    k = np.eye(3).reshape(1, 1, 3, 3)
    out = conv2d(Tensor(x), Tensor(k))
    assert np.array_equal(out.data, x)


def test_conv2d_zero_kernel():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(4, 5, 2))
    out = conv2d(Tensor(x), Tensor(np.zeros((3, 3, 2, 4))), padding=1)
    assert np.array_equal(out.data, np.zeros((4, 5, 4)))


def test_conv2d_vs_nested_loop():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(5, 5, 2))
    k = rng.normal(size=(3, 3, 2, 1))
    got = conv2d(Tensor(x), Tensor(k), stride=1, padding=1).data
    assert np.allclose(got, conv2d_oracle(x, k, 1, 1), atol=1e-10, rtol=0)


def test_conv2d_random_configs_vs_oracle():
    rng = np.random.default_rng(11)
    for kh, stride, padding in [(1, 1, 0), (3, 1, 0), (3, 1, 1), (3, 2, 1), (1, 2, 0)]:
        h, w = rng.integers(kh, 13, size=2)
        cin, cout = rng.integers(1, 5, size=2)
        x = rng.normal(size=(h, w, cin))
        k = rng.normal(size=(kh, kh, cin, cout))
        got = conv2d(Tensor(x), Tensor(k), stride=stride, padding=padding).data
        assert np.allclose(got, conv2d_oracle(x, k, stride, padding), atol=1e-10)


def test_conv2d_batched_matches_per_image():
    rng = np.random.default_rng(3)
    xs = rng.normal(size=(3, 6, 8, 2))
    k = rng.normal(size=(3, 3, 2, 4))
    batched = conv2d(Tensor(xs), Tensor(k), padding=1).data
    for i in range(3):
        single = conv2d(Tensor(xs[i]), Tensor(k), padding=1).data
        assert np.array_equal(batched[i], single)


def test_conv2d_output_collapse_is_config_error():
    with pytest.raises(ConfigError):
        conv2d(Tensor(np.zeros((2, 2, 1))), Tensor(np.zeros((3, 3, 1, 1))), stride=1, padding=0)


def test_conv2d_rejects_unsupported_kernel_size():
    with pytest.raises(ConfigError):
        conv2d(Tensor(np.zeros((8, 8, 1))), Tensor(np.zeros((5, 5, 1, 1))))


# ---------------------------------------------------------------------------
# softmax


def test_softmax_uniform():
    out = softmax(Tensor([0.0, 0.0, 0.0]))
    assert np.allclose(out.data, [1 / 3] * 3, atol=1e-15)


def test_softmax_limit():
    out = softmax(Tensor([1.0, 51.0]))
    assert abs(out.data[0] - 0.0) < 1e-6
    assert abs(out.data[1] - 1.0) < 1e-6


def test_softmax_frozen_value():
    # frozen from the scalar formula evaluated independently (softmax_oracle_1d)
    expected = [0.09003057317038046, 0.24472847105479764, 0.6652409557748219]
    out = softmax(Tensor([1.0, 2.0, 3.0]))
    assert np.allclose(out.data, expected, atol=1e-12, rtol=0)
    assert np.allclose(out.data, softmax_oracle_1d([1.0, 2.0, 3.0]), atol=1e-14)


def test_softmax_slices_sum_to_one_and_positive():
    rng = np.random.default_rng(9)
    for axis in (0, 1, -1):
        x = rng.normal(scale=20.0, size=(6, 7))
        out = softmax(Tensor(x), axis=axis).data
        assert np.all(out > 0.0)
        assert np.allclose(out.sum(axis=axis), 1.0, atol=1e-12, rtol=0)


def test_softmax_invalid_axis():
    with pytest.raises(ShapeError):
        softmax(Tensor([1.0, 2.0]), axis=2)


# ---------------------------------------------------------------------------
# layernorm


def test_layernorm_constant_input_is_zero():
    x = Tensor(np.full((4, 8), 3.7))
    out = layernorm(x, Tensor(np.ones(8)), Tensor(np.zeros(8)))
    assert np.allclose(out.data, 0.0, atol=1e-12)


def test_layernorm_standardized_input_fixed_point():
    rng = np.random.default_rng(2)
    v = rng.normal(size=16)
    v = (v - v.mean()) / v.std()
    out = layernorm(Tensor(v), Tensor(np.ones(16)), Tensor(np.zeros(16)), epsilon=1e-12)
    assert np.allclose(out.data, v, atol=1e-5)


def test_layernorm_vs_scalar_oracle():
    rng = np.random.default_rng(8)
    v = rng.normal(size=8)
    gain = rng.normal(size=8)
    bias = rng.normal(size=8)
    out = layernorm(Tensor(v), Tensor(gain), Tensor(bias), epsilon=1e-5)
    expected = layernorm_oracle_1d(list(v), list(gain), list(bias), 1e-5)
    assert np.allclose(out.data, expected, atol=1e-12)


# ---------------------------------------------------------------------------
# cross entropy


def test_cross_entropy_peaked():
    logits = np.zeros((3, 6))
    targets = [1, 4, 2]
    for i, t in enumerate(targets):
        logits[i, t] = 50.0
    loss = cross_entropy(Tensor(logits), targets)
    assert loss.item() < 1e-6


def test_cross_entropy_uniform_is_log_c():
    loss = cross_entropy(Tensor(np.zeros((4, 94))), [0, 5, 93, 17])
    assert abs(loss.item() - math.log(94)) < 1e-12


def test_cross_entropy_vs_scalar_oracle():
    rng = np.random.default_rng(4)
    logits = rng.normal(size=(2, 5))
    targets = [3, 0]
    loss = cross_entropy(Tensor(logits), targets)
    assert abs(loss.item() - cross_entropy_oracle(logits, targets, -1)) < 1e-12


def test_cross_entropy_ignore_index():
    rng = np.random.default_rng(6)
    logits = rng.normal(size=(4, 5))
    full = cross_entropy(Tensor(logits[:2]), [1, 2]).item()
    padded = cross_entropy(Tensor(logits), [1, 2, 9, 9], ignore_index=9).item()
    assert abs(full - padded) < 1e-12


def test_cross_entropy_all_ignored_raises():
    with pytest.raises(ShapeError, match="ignored"):
        cross_entropy(Tensor(np.zeros((2, 5))), [7, 7], ignore_index=7)


# ---------------------------------------------------------------------------
# backward mechanics


def test_backward_sum_gives_ones():
    x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    with Tape() as tape:
        loss = sum_all(x)
    tape.backward(loss)
    assert np.array_equal(x.grad, np.ones((2, 3)))


def test_backward_dot_gives_2x():
    rng = np.random.default_rng(3)
    x = Tensor(rng.normal(size=5), requires_grad=True)
    with Tape() as tape:
        loss = sum_all(mul(x, x))
    tape.backward(loss)
    assert np.allclose(x.grad, 2 * x.data, atol=1e-12)


def test_backward_requires_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        y = mul(x, x)
    with pytest.raises(ShapeError):
        tape.backward(y)


def test_backward_accumulates_across_calls():
    x = Tensor(np.ones(4), requires_grad=True)
    with Tape() as tape:
        loss = sum_all(x)
    tape.backward(loss)
    tape.backward(loss)
    assert np.array_equal(x.grad, 2 * np.ones(4))


def test_backward_fanout_sums_contributions():
    # y feeds two consumers; d/dx [sum(y*y) + sum(3*y)] = 2x + 3
    x = Tensor(np.array([1.0, -2.0, 0.5]), requires_grad=True)
    with Tape() as tape:
        y = scale(x, 1.0)
        loss = add(sum_all(mul(y, y)), sum_all(scale(y, 3.0)))
    tape.backward(loss)
    assert np.allclose(x.grad, 2 * x.data + 3.0, atol=1e-12)

    def f(t):
        y = scale(t, 1.0)
        return add(sum_all(mul(y, y)), sum_all(scale(y, 3.0)))

    assert fd_check(f, Tensor(x.data.copy(), requires_grad=True)) < 1e-4


def test_nan_is_hard_error():
    x = Tensor(np.array([1.0, np.nan]))
    with pytest.raises(NonFiniteError, match="relu"):
        relu(x)


# ---------------------------------------------------------------------------
# fd_check on every differentiable op (relative tol 1e-4, step 1e-5)


def test_fd_check_sum_is_exact():
    x = Tensor(np.random.default_rng(0).normal(size=6), requires_grad=True)
    assert fd_check(sum_all, x) < 1e-9


def test_fd_check_softmax_pick():
    x = Tensor(np.random.default_rng(1).normal(size=7), requires_grad=True)

    def f(t):
        p = softmax(t)
        return sum_all(mul(p, p))

    assert fd_check(f, x) < 1e-4


def _weighted(y: Tensor, seed: int) -> Tensor:
    # fixed random projection to a scalar so fd_check exercises all outputs
    w = Tensor(np.random.default_rng(seed).normal(size=y.shape))
    return sum_all(mul(y, w))


FD_CASES = {
    "add": lambda x: _weighted(add(x, Tensor(np.random.default_rng(100).normal(size=x.shape))), 0),
    "add_bias": lambda x: _weighted(add(Tensor(np.random.default_rng(101).normal(size=(3,) + x.shape)), x), 1),
    "add_scalar": lambda x: _weighted(add_scalar(x, 1.5), 2),
    "scale": lambda x: _weighted(scale(x, -2.5), 3),
    "mul": lambda x: _weighted(mul(x, Tensor(np.random.default_rng(102).normal(size=x.shape))), 4),
    "relu": lambda x: _weighted(relu(x), 5),
    "sigmoid": lambda x: _weighted(sigmoid(x), 6),
    "tanh": lambda x: _weighted(tanh(x), 7),
    "softmax": lambda x: _weighted(softmax(x, axis=-1), 8),
    "sum": lambda x: sum_all(x),
    "reshape": lambda x: _weighted(reshape(x, (x.size,)), 9),
}


@pytest.mark.parametrize("name", sorted(FD_CASES))
def test_fd_elementwise_ops(name):
    rng = np.random.default_rng(hash(name) % 2**32)
    x = Tensor(rng.normal(size=(4, 6)) + 0.1, requires_grad=True)
    assert fd_check(FD_CASES[name], x) < 1e-4


def test_fd_matmul_both_sides():
    rng = np.random.default_rng(12)
    b = Tensor(rng.normal(size=(5, 3)))
    x = Tensor(rng.normal(size=(4, 5)), requires_grad=True)
    assert fd_check(lambda t: _weighted(matmul(t, b), 0), x) < 1e-4
    a = Tensor(rng.normal(size=(3, 4)))
    y = Tensor(rng.normal(size=(4, 6)), requires_grad=True)
    assert fd_check(lambda t: _weighted(matmul(a, t), 1), y) < 1e-4


def test_fd_transpose_concat_repeat():
    rng = np.random.default_rng(13)
    x = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    other = Tensor(rng.normal(size=(2, 4)))
    assert fd_check(lambda t: _weighted(transpose2d(t), 0), x) < 1e-4
    assert fd_check(lambda t: _weighted(concat([t, other], axis=0), 1), x) < 1e-4
    assert fd_check(lambda t: _weighted(repeat_rows(t, 3), 2), x) < 1e-4


def test_fd_linear():
    rng = np.random.default_rng(14)
    w = Tensor(rng.normal(size=(4, 6)), requires_grad=True)
    b = Tensor(rng.normal(size=4), requires_grad=True)
    x = Tensor(rng.normal(size=(5, 6)), requires_grad=True)
    assert fd_check(lambda t: _weighted(linear(t, w, b), 0), x) < 1e-4
    assert fd_check(lambda t: _weighted(linear(x, t, b), 1), w) < 1e-4
    assert fd_check(lambda t: _weighted(linear(x, w, t), 2), b) < 1e-4


def test_fd_embedding():
    rng = np.random.default_rng(15)
    table = Tensor(rng.normal(size=(9, 4)), requires_grad=True)
    ids = [0, 3, 3, 8]
    assert fd_check(lambda t: _weighted(embedding(t, ids), 0), table) < 1e-4


def test_fd_layernorm_all_inputs():
    rng = np.random.default_rng(16)
    x = Tensor(rng.normal(size=(3, 6)), requires_grad=True)
    g = Tensor(rng.normal(size=6), requires_grad=True)
    b = Tensor(rng.normal(size=6), requires_grad=True)
    assert fd_check(lambda t: _weighted(layernorm(t, g, b), 0), x) < 1e-4
    assert fd_check(lambda t: _weighted(layernorm(x, t, b), 1), g) < 1e-4
    assert fd_check(lambda t: _weighted(layernorm(x, g, t), 2), b) < 1e-4


def test_fd_cross_entropy():
    rng = np.random.default_rng(17)
    x = Tensor(rng.normal(size=(5, 7)), requires_grad=True)
    targets = [0, 6, 3, 9, 2]  # position 3 ignored
    assert fd_check(lambda t: cross_entropy(t, targets, ignore_index=9), x) < 1e-4


def test_fd_conv2d_and_kernel():
    rng = np.random.default_rng(18)
    x = Tensor(rng.normal(size=(5, 6, 2)), requires_grad=True)
    k = Tensor(rng.normal(size=(3, 3, 2, 3)), requires_grad=True)
    assert fd_check(lambda t: _weighted(conv2d(t, k, stride=1, padding=1), 0), x) < 1e-4
    assert fd_check(lambda t: _weighted(conv2d(x, t, stride=1, padding=1), 1), k) < 1e-4
    k1 = Tensor(rng.normal(size=(1, 1, 2, 4)), requires_grad=True)
    assert fd_check(lambda t: _weighted(conv2d(x, t), 2), k1) < 1e-4


def test_fd_maxpool_and_avgpool():
    rng = np.random.default_rng(19)
    x = Tensor(rng.normal(size=(6, 8, 3)), requires_grad=True)
    assert fd_check(lambda t: _weighted(maxpool2d(t), 0), x) < 1e-4
    assert fd_check(lambda t: _weighted(avgpool_global(t), 1), x) < 1e-4


def test_fd_batchnorm_train_mode():
    rng = np.random.default_rng(20)
    x = Tensor(rng.normal(size=(2, 4, 4, 3)), requires_grad=True)
    g = Tensor(rng.normal(size=3) + 1.0, requires_grad=True)
    b = Tensor(rng.normal(size=3), requires_grad=True)

    def run(t, mode):
        # fresh state per call: running-stat updates must not leak between probes
        st = BatchNormState(3)
        if mode == "x":
            return _weighted(batchnorm2d(t, g, b, st, training=True), 0)
        if mode == "g":
            return _weighted(batchnorm2d(x, t, b, st, training=True), 1)
        return _weighted(batchnorm2d(x, g, t, st, training=True), 2)

    assert fd_check(lambda t: run(t, "x"), x) < 1e-4
    assert fd_check(lambda t: run(t, "g"), g) < 1e-4
    assert fd_check(lambda t: run(t, "b"), b) < 1e-4


def test_fd_batchnorm_eval_mode():
    rng = np.random.default_rng(21)
    x = Tensor(rng.normal(size=(2, 4, 4, 3)), requires_grad=True)
    g = Tensor(rng.normal(size=3) + 1.0)
    b = Tensor(rng.normal(size=3))
    st = BatchNormState(3)
    st.mean[:] = rng.normal(size=3)
    st.var[:] = rng.uniform(0.5, 2.0, size=3)
    assert fd_check(lambda t: _weighted(batchnorm2d(t, g, b, st, training=False), 0), x) < 1e-4


# ---------------------------------------------------------------------------
# pooling / batchnorm behavior


def test_maxpool_values():
    x = np.arange(16.0).reshape(1, 4, 4, 1)
    out = maxpool2d(Tensor(x))
    assert np.array_equal(out.data[0, :, :, 0], [[5.0, 7.0], [13.0, 15.0]])


def test_maxpool_odd_size_rejected():
    with pytest.raises(ConfigError):
        maxpool2d(Tensor(np.zeros((5, 4, 1))))


def test_avgpool_is_mean():
    rng = np.random.default_rng(22)
    x = rng.normal(size=(3, 5, 2))
    out = avgpool_global(Tensor(x))
    assert np.allclose(out.data, x.mean(axis=(0, 1)), atol=1e-12)


def test_batchnorm_eval_bit_identical():
    rng = np.random.default_rng(23)
    x = Tensor(rng.normal(size=(2, 4, 4, 3)))
    g = Tensor(rng.normal(size=3))
    b = Tensor(rng.normal(size=3))
    st = BatchNormState(3)
    st.mean[:] = rng.normal(size=3)
    st.var[:] = rng.uniform(0.5, 2.0, size=3)
    out1 = batchnorm2d(x, g, b, st, training=False).data
    out2 = batchnorm2d(x, g, b, st, training=False).data
    assert np.array_equal(out1, out2)
    # and the running buffers were not touched
    out3 = batchnorm2d(x, g, b, st, training=False).data
    assert np.array_equal(out1, out3)


def test_batchnorm_train_normalizes_and_updates_running():
    rng = np.random.default_rng(24)
    x = Tensor(rng.normal(loc=2.0, scale=3.0, size=(4, 6, 6, 2)))
    g = Tensor(np.ones(2))
    b = Tensor(np.zeros(2))
    st = BatchNormState(2)
    out = batchnorm2d(x, g, b, st, training=True, momentum=0.1)
    assert np.allclose(out.data.mean(axis=(0, 1, 2)), 0.0, atol=1e-10)
    assert np.allclose(out.data.var(axis=(0, 1, 2)), 1.0, atol=1e-6)
    batch_mean = x.data.mean(axis=(0, 1, 2))
    assert np.allclose(st.mean, 0.1 * batch_mean, atol=1e-12)


# ---------------------------------------------------------------------------
# kernel backends


def test_kernel_backends_agree():
    import hatr.kernels as K
    from hatr.kernels import pyref

    if K.BACKEND != "compiled":
        pytest.skip("compiled backend not built")
    rng = np.random.default_rng(25)
    x = np.ascontiguousarray(rng.normal(size=(2, 8, 10, 3)))
    a = K.im2col(x, 3, 3, 1, 1, 6, 8)
    b = pyref.im2col(x, 3, 3, 1, 1, 6, 8)
    assert np.array_equal(a, b)
    cols = np.ascontiguousarray(rng.normal(size=a.shape))
    c1 = K.col2im(cols, 2, 8, 10, 3, 3, 3, 1, 1, 6, 8)
    c2 = pyref.col2im(cols, 2, 8, 10, 3, 3, 3, 1, 1, 6, 8)
    assert np.allclose(c1, c2, atol=1e-12)
    o1, i1 = K.maxpool2_forward(x)
    o2, i2 = pyref.maxpool2_forward(x)
    assert np.array_equal(o1, o2) and np.array_equal(i1, i2)
    g = np.ascontiguousarray(rng.normal(size=o1.shape))
    assert np.array_equal(K.maxpool2_backward(g, i1), pyref.maxpool2_backward(g, i2))
