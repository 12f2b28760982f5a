import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from autocurriculum import tape as ad


def numeric_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    flat = g.reshape(-1)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = h
        e = e.reshape(x.shape)
        flat[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def tape_grad(f, x):
    t = ad.Tape()
    v = t.leaf(x)
    out = f(v)
    (g,) = t.backward(out, [v])
    return ad.value_of(out), g


FUNCS = {
    "poly": lambda x: ad.sum(x * x * 3.0 - x / 2.0 + 1.0),
    "exp_log": lambda x: ad.sum(ad.log(ad.exp(x) + 1.0)),
    "tanh_sig": lambda x: ad.sum(ad.tanh(x) * ad.sigmoid(x)),
    "softmax": lambda x: ad.sum(ad.softmax(x) * np.arange(x.shape[-1] if hasattr(x, "shape") else 4)),
    "power": lambda x: ad.sum(ad.power(ad.exp(x), 1.5)),
    "division": lambda x: ad.sum(1.0 / (ad.square(x) + 1.0)),
    "mean_neg": lambda x: -ad.mean(ad.square(x)),
}


@pytest.mark.parametrize("name", sorted(FUNCS))
def test_elementwise_gradients(name):
    f = FUNCS[name]
    x = np.random.default_rng(0).normal(size=4)
    val, g = tape_grad(f, x)
    assert np.isclose(val, f(x))
    assert np.allclose(g, numeric_grad(f, x), rtol=1e-6, atol=1e-8)


def test_matmul_broadcast_and_indexing():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(3, 4))
    b = rng.normal(size=4)

    def f(W):
        h = ad.relu(ad.matmul(W, A) + b)  # (2, 4)
        z = ad.concatenate([h[0], ad.reshape(h, (-1,))[2:5]])
        return ad.sum(ad.leaky_relu(z) * z)

    W = rng.normal(size=(2, 3))
    _, g = tape_grad(f, W)
    assert np.allclose(g, numeric_grad(f, W), rtol=1e-5, atol=1e-8)


def test_stack_transpose_dot():
    rng = np.random.default_rng(2)
    v = rng.normal(size=3)

    def f(x):
        M = ad.stack([x, x * 2.0, ad.tanh(x)])
        return ad.dot(ad.sum(ad.transpose(M), axis=1), v)

    x = rng.normal(size=3)
    _, g = tape_grad(f, x)
    assert np.allclose(g, numeric_grad(f, x), rtol=1e-6, atol=1e-9)


def test_repeated_index_accumulates():
    t = ad.Tape()
    x = t.leaf(np.array([1.0, 2.0]))
    y = ad.sum(x[np.array([0, 0, 1])])
    (g,) = t.backward(y, [x])
    assert np.array_equal(g, [2.0, 1.0])


def test_custom_node_vjp():
    t = ad.Tape()
    x = t.leaf(np.array([1.0, 2.0]))
    y = t.custom(ad.value_of(x) ** 2, [x], lambda cot: [2 * ad.value_of(x) * cot])
    (g,) = t.backward(ad.sum(y), [x])
    assert np.array_equal(g, [2.0, 4.0])


def test_replay_reproduces_value():
    t = ad.Tape()
    x = t.leaf(np.array([0.3, -0.2, 0.5]))
    out = ad.sum(ad.softmax(x) * ad.exp(x))
    first = ad.value_of(out)
    for _ in range(3):
        assert t.replay()[out.index] == first
    moved = np.array([0.1, 0.4, -0.3])
    expect = np.sum(np.exp(moved) / np.exp(moved).sum() * np.exp(moved))
    assert np.isclose(t.replay({x: moved})[out.index], expect, rtol=1e-14)


def test_plain_arrays_pass_through():
    x = np.array([1.0, 2.0])
    assert not ad.is_var(ad.exp(x))
    assert np.array_equal(ad.value_of(ad.softmax(x)), np.exp(x) / np.exp(x).sum())


def test_stable_sigmoid_and_softmax_extremes():
    assert np.all(np.isfinite(ad.sigmoid(np.array([-1000.0, 1000.0]))))
    s = ad.softmax(np.array([1000.0, 0.0, -1000.0]))
    assert np.isclose(s.sum(), 1.0) and s[0] == 1.0


@given(arrays(np.float64, st.integers(1, 6), elements=st.floats(-5, 5)))
@settings(max_examples=50, deadline=None)
def test_softmax_gradient_orthogonal_to_ones(x):
    # softmax is shift invariant, so every gradient through it sums to zero
    w = np.arange(x.size, dtype=float)
    _, g = tape_grad(lambda v: ad.sum(ad.softmax(v) * w), x)
    assert abs(g.sum()) < 1e-9
