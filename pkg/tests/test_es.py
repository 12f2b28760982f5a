import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from autocurriculum.errors import ConfigError, NonFiniteError
from autocurriculum.es import EsConfig, clip_by_norm, es_estimate, es_samples, perturbation, update_params


def half_square(x):
    return 0.5 * float(x @ x)


def test_forward_fd_on_quadratic_repeated():
    cfg = EsConfig(n_perturb=2000, sigma=0.1, antithetic=False, control_variate="forward_fd")
    errs = []
    for rep in range(20):
        theta = np.random.default_rng([rep, 7]).normal(size=10)
        g = es_estimate(half_square, theta, cfg, seed_words=(rep,))
        errs.append(np.linalg.norm(g - theta) / np.linalg.norm(theta))
    assert max(errs) < 0.15


def test_control_variate_reduces_variance_without_bias():
    theta = np.random.default_rng(0).normal(size=10)
    n = 10_000
    fd = es_samples(half_square, theta, EsConfig(n, 0.1, False, "forward_fd"), (1,))
    raw = es_samples(half_square, theta, EsConfig(n, 0.1, False, "none"), (1,))
    se = np.sqrt(fd.var(axis=0, ddof=1) / n + raw.var(axis=0, ddof=1) / n)
    assert np.all(np.abs(fd.mean(axis=0) - raw.mean(axis=0)) < 3 * se)
    assert np.all(fd.var(axis=0) < raw.var(axis=0))


def test_constant_objective_gives_zero():
    g = es_estimate(lambda x: 3.0, np.ones(4), EsConfig(50, 0.1, False, "forward_fd"))
    assert np.array_equal(g, np.zeros(4))


@given(seed=st.integers(0, 10_000), sigma=st.floats(1e-3, 10.0))
@settings(max_examples=30, deadline=None)
def test_antithetic_linear_objective(seed, sigma):
    c = np.random.default_rng(seed).normal(size=5)
    cfg = EsConfig(1, sigma, True)
    sample = es_samples(lambda x: float(c @ x), np.zeros(5), cfg, (seed,))[0]
    eps = perturbation((seed,), 0, 5)
    # one pair gives (c . eps) eps, independent of the perturbation scale
    assert np.allclose(sample, (c @ eps) * eps, rtol=1e-9, atol=1e-9)


def test_antithetic_linear_objective_averages_to_gradient():
    c = np.arange(1.0, 6.0)
    g = es_estimate(lambda x: float(c @ x), np.zeros(5), EsConfig(20_000, 0.5, True), (3,))
    assert np.linalg.norm(g - c) / np.linalg.norm(c) < 0.05


def test_evaluation_order_does_not_change_estimate():
    theta = np.random.default_rng(2).normal(size=6)
    cfg = EsConfig(40, 0.2, True)
    f = lambda x: float(np.sin(x).sum() + x @ x)  # noqa: E731
    a = es_estimate(f, theta, cfg, (5, 6))
    order = np.random.default_rng(9).permutation(40)
    b = es_estimate(f, theta, cfg, (5, 6), order=order)
    assert np.array_equal(a, b)


def test_perturbation_depends_only_on_seed_and_index():
    assert np.array_equal(perturbation((1, 2), 3, 8), perturbation((1, 2), 3, 8))
    assert not np.array_equal(perturbation((1, 2), 3, 8), perturbation((1, 2), 4, 8))


def test_non_finite_objective_raises():
    with pytest.raises(NonFiniteError):
        es_estimate(lambda x: float("nan"), np.zeros(2), EsConfig(2, 0.1))


def test_config_validation():
    with pytest.raises(ConfigError):
        EsConfig(n_perturb=0)
    with pytest.raises(ConfigError):
        EsConfig(sigma=0.0)
    with pytest.raises(ConfigError):
        EsConfig(control_variate="linear")


# -- update rule ----------------------------------------------------------------

def test_zero_gradient_keeps_parameters():
    theta = np.arange(3.0)
    assert np.array_equal(update_params(theta, np.zeros(3), 0.5, 1.0), theta)


def test_clipping_halves_twice_clip_norm():
    g = np.array([3.0, 4.0])  # norm 5
    clipped = clip_by_norm(g, 2.5)
    assert np.allclose(clipped, g / 2)
    theta = np.zeros(2)
    assert np.allclose(update_params(theta, g, 1.0, 2.5), -g / 2)


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=8), st.floats(1e-3, 10.0))
@settings(max_examples=100, deadline=None)
def test_clipping_preserves_direction(vals, clip):
    g = np.array(vals)
    c = clip_by_norm(g, clip)
    assert np.linalg.norm(c) <= max(clip, np.linalg.norm(g)) * (1 + 1e-12)
    if np.linalg.norm(g) > 0:
        scale = np.linalg.norm(c) / np.linalg.norm(g)
        assert 0 <= scale <= 1 + 1e-12
        assert np.allclose(c, scale * g, atol=1e-9)


def test_update_does_not_mutate_input():
    theta = np.ones(3)
    update_params(theta, np.ones(3), 0.1)
    assert np.array_equal(theta, np.ones(3))
