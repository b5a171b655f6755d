import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdgsim import neural
from fdgsim.errors import ConfigError, ShapeError
from fdgsim.neural import ParamVector

from conftest import finite_difference_grad, naive_forward, random_mlp_case, relative_error


def test_init_is_deterministic():
    a = neural.init_model([3, 5, 4], seed=7)
    b = neural.init_model([3, 5, 4], seed=7)
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)


def test_init_seeds_differ():
    a = neural.params_to_vec(neural.init_model([3, 5, 4], seed=1)).values
    b = neural.params_to_vec(neural.init_model([3, 5, 4], seed=2)).values
    assert not np.array_equal(a, b)


def test_init_scale_and_zero_biases():
    m = neural.init_model([10, 30, 4], seed=0)
    for w in m.weights:
        fan_out, fan_in = w.shape
        assert np.abs(w).max() <= np.sqrt(6.0 / (fan_in + fan_out))
    assert all(not b.any() for b in m.biases)


def test_param_length_single_layer():
    assert len(neural.params_to_vec(neural.init_model([2, 7], seed=0))) == 2 * 7 + 7


@pytest.mark.parametrize("sizes", [[], [3], [3, 0, 2], [0, 2]])
def test_degenerate_sizes_rejected(sizes):
    with pytest.raises(ConfigError):
        neural.init_model(sizes, 0)


def test_zero_model_gives_zero_logits():
    m = neural.init_model([3, 4, 5], 0)
    zero = neural.vec_to_params(np.zeros(len(neural.params_to_vec(m))), m.layer_sizes)
    assert not neural.forward(zero, np.ones((2, 3))).any()


def test_identity_linear_model():
    m = neural.MlpModel((3, 3), (np.eye(3),), (np.zeros(3),))
    x = np.array([[0.5, -2.0, 3.25]])
    assert np.array_equal(neural.forward(m, x), x)


def test_forward_matches_naive(rng):
    for _ in range(20):
        model, x, _ = random_mlp_case(rng)
        np.testing.assert_allclose(neural.forward(model, x), naive_forward(model, x), rtol=1e-12, atol=1e-13)


def test_forward_shape_mismatch():
    m = neural.init_model([3, 2], 0)
    with pytest.raises(ShapeError):
        neural.forward(m, np.ones((4, 2)))


def test_forward_is_pure(rng):
    model, x, _ = random_mlp_case(rng)
    first = neural.forward(model, x)
    assert np.array_equal(first, neural.forward(model, x))


@pytest.mark.parametrize("c", [0.0, -3.5, 1e3, -1e3])
def test_softmax_constant_rows_uniform(c):
    p = neural.softmax(np.full((1, 3), c))
    np.testing.assert_allclose(p, [[1 / 3] * 3], rtol=0, atol=1e-15)


def test_softmax_large_logit_against_high_precision():
    p = neural.softmax(np.array([[1000.0, 0.0]]))
    with mpmath.workdps(50):
        small = mpmath.exp(-1000) / (1 + mpmath.exp(-1000))
    assert np.isfinite(p).all()
    assert p[0, 0] == 1.0
    assert p[0, 1] == pytest.approx(float(small), rel=1e-12)


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=12))
def test_softmax_rows_sum_to_one(row):
    p = neural.softmax(np.array([row]))
    assert (p >= 0).all()
    assert abs(p.sum() - 1.0) <= 1e-12


def test_uniform_targets_zero_model_loss_is_log_m():
    sizes = [3, 6]
    zero = neural.vec_to_params(np.zeros(neural.param_count(sizes)), sizes)
    loss, _ = neural.loss_and_grads(zero, np.ones((5, 3)), np.full((5, 6), 1 / 6))
    assert loss == pytest.approx(np.log(6), rel=1e-14)


def test_one_hot_loss_is_nll(rng):
    model, x, _ = random_mlp_case(rng)
    m = model.n_classes
    y = rng.integers(m, size=x.shape[0])
    loss, _ = neural.loss_and_grads(model, x, np.eye(m)[y])
    p = neural.softmax(neural.forward(model, x))
    assert loss == pytest.approx(-np.log(p[np.arange(len(y)), y]).mean(), rel=1e-13)


def test_gradients_match_finite_differences(rng):
    worst = 0.0
    for _ in range(25):
        model, x, y = random_mlp_case(rng)
        _, g = neural.loss_and_grads(model, x, y)
        worst = max(worst, relative_error(g.values, finite_difference_grad(model, x, y)))
    assert worst < 1e-4


def test_logit_gradient_is_p_minus_target(rng):
    # single linear layer: d loss / d bias == mean(p - y)
    model = neural.init_model([3, 5], 0)
    x = rng.normal(size=(4, 3))
    y = rng.dirichlet(np.ones(5), size=4)
    _, g = neural.loss_and_grads(model, x, y)
    p = neural.softmax(neural.forward(model, x))
    np.testing.assert_allclose(g.values[-5:], (p - y).mean(axis=0), atol=1e-15)


def test_targets_shape_checked():
    m = neural.init_model([2, 3], 0)
    with pytest.raises(ShapeError):
        neural.loss_and_grads(m, np.ones((2, 2)), np.ones((3, 3)) / 3)


def test_round_trip_bit_identical(rng):
    model, _, _ = random_mlp_case(rng)
    vec = neural.params_to_vec(model)
    back = neural.vec_to_params(vec)
    assert np.array_equal(neural.params_to_vec(back).values, vec.values)
    for wa, wb in zip(model.weights, back.weights):
        assert np.array_equal(wa, wb)


def test_average_via_vectors_matches_per_weight(rng):
    a = neural.init_model([3, 4, 2], 1)
    b = neural.init_model([3, 4, 2], 2)
    avg = neural.vec_to_params((neural.params_to_vec(a).values + neural.params_to_vec(b).values) / 2, a.layer_sizes)
    for l in range(2):
        for i in range(a.weights[l].shape[0]):
            for j in range(a.weights[l].shape[1]):
                assert avg.weights[l][i, j] == (a.weights[l][i, j] + b.weights[l][i, j]) / 2


def test_wrong_length_vector_rejected():
    with pytest.raises(ShapeError):
        neural.vec_to_params(np.zeros(20), [2, 7])
    with pytest.raises(ShapeError):
        ParamVector(np.zeros(20), (2, 7))


@settings(max_examples=50)
@given(st.lists(st.integers(1, 6), min_size=2, max_size=4), st.integers(0, 2**31))
def test_round_trip_property(sizes, seed):
    vec = neural.params_to_vec(neural.init_model(sizes, seed))
    assert np.array_equal(neural.params_to_vec(neural.vec_to_params(vec)).values, vec.values)
