import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fdgsim import optim
from fdgsim.errors import ConfigError, ShapeError
from fdgsim.neural import ParamVector

SIZES = (1, 1)  # two parameters: one weight, one bias


def pv(values, sizes=SIZES):
    return ParamVector(np.asarray(values, dtype=float), sizes)


def test_sgd_hand_example():
    cfg = optim.OptimizerConfig("sgd", eta=0.1)
    new, state = optim.step(optim.init_state(2), pv([1.0, 2.0]), pv([0.5, -1.0]), cfg)
    np.testing.assert_allclose(new.values, [0.95, 2.1], rtol=0, atol=1e-15)
    assert state.t == 1


@pytest.mark.parametrize("kind", optim.KINDS)
def test_zero_gradient_is_fixed_point(kind):
    cfg = optim.OptimizerConfig(kind, eta=0.5)
    p = pv([1.5, -2.0])
    new, _ = optim.step(optim.init_state(2), p, pv([0.0, 0.0]), cfg)
    assert np.array_equal(new.values, p.values)


def test_adam_first_step_closed_form():
    cfg = optim.OptimizerConfig("adam", eta=1e-3)
    g = np.array([0.3, -7.0])
    new, state = optim.step(optim.init_state(2), pv([0.0, 0.0]), pv(g), cfg)
    expected = -cfg.eta * g / (np.abs(g) + cfg.eps)
    np.testing.assert_allclose(new.values, expected, rtol=1e-12)
    assert state.t == 1


def test_adam_matches_reference_loop():
    # textbook loop over scalars, two steps
    cfg = optim.OptimizerConfig("adam", eta=0.01, beta1=0.8, beta2=0.99, eps=1e-6)
    grads = [np.array([0.2, -0.1]), np.array([0.4, 0.3])]
    p, state = pv([1.0, 1.0]), optim.init_state(2)
    ref_p, m, v = [1.0, 1.0], [0.0, 0.0], [0.0, 0.0]
    for t, g in enumerate(grads, start=1):
        p, state = optim.step(state, p, pv(g), cfg)
        for i in range(2):
            m[i] = 0.8 * m[i] + 0.2 * g[i]
            v[i] = 0.99 * v[i] + 0.01 * g[i] ** 2
            ref_p[i] -= 0.01 * (m[i] / (1 - 0.8**t)) / ((v[i] / (1 - 0.99**t)) ** 0.5 + 1e-6)
    np.testing.assert_allclose(p.values, ref_p, rtol=1e-13)


@given(st.floats(1.0, 1e6), st.booleans())
def test_adam_scale_invariance_large_gradients(mag, negative):
    cfg = optim.OptimizerConfig()
    g = -mag if negative else mag
    a, _ = optim.step(optim.init_state(2), pv([0.0, 0.0]), pv([g, g]), cfg)
    b, _ = optim.step(optim.init_state(2), pv([0.0, 0.0]), pv([10 * g, 10 * g]), cfg)
    assert np.max(np.abs(a.values - b.values)) < 1e-6


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=2),
       st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=2),
       st.sampled_from(optim.KINDS))
def test_no_nan_on_finite_input(p, g, kind):
    new, _ = optim.step(optim.init_state(2), pv(p), pv(g), optim.OptimizerConfig(kind))
    assert np.isfinite(new.values).all()


def test_sgd_linear_in_grads_and_eta(rng):
    p = pv(rng.normal(size=2))
    g = rng.normal(size=2)
    d1 = optim.step(optim.init_state(2), p, pv(g), optim.OptimizerConfig("sgd", eta=0.25))[0].values - p.values
    d2 = optim.step(optim.init_state(2), p, pv(2 * g), optim.OptimizerConfig("sgd", eta=0.25))[0].values - p.values
    d3 = optim.step(optim.init_state(2), p, pv(g), optim.OptimizerConfig("sgd", eta=0.5))[0].values - p.values
    np.testing.assert_allclose(d2, 2 * d1, rtol=1e-12)
    np.testing.assert_allclose(d3, 2 * d1, rtol=1e-12)


def test_length_mismatch():
    with pytest.raises(ShapeError):
        optim.step(optim.init_state(2), pv([1.0, 2.0]), pv(np.zeros(6), (2, 2)), optim.OptimizerConfig())


@pytest.mark.parametrize("kwargs", [dict(kind="rmsprop"), dict(eta=0.0), dict(beta1=1.0), dict(beta2=-0.1)])
def test_invalid_config(kwargs):
    with pytest.raises(ConfigError):
        optim.OptimizerConfig(**kwargs)


def test_defaults():
    cfg = optim.OptimizerConfig()
    assert (cfg.kind, cfg.eta, cfg.beta1, cfg.beta2, cfg.eps) == ("adam", 1e-4, 0.9, 0.999, 1e-8)
