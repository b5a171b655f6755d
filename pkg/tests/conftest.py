from __future__ import annotations

import math

import numpy as np
import pytest

from fdgsim import neural

# -- independent oracles -------------------------------------------------------


def naive_forward(model: neural.MlpModel, x: np.ndarray) -> list[list[float]]:
    """Straight-line python recomputation of the MLP forward pass."""
    out = []
    n_layers = len(model.weights)
    for row in x:
        a = [float(v) for v in row]
        for l in range(n_layers):
            w, b = model.weights[l], model.biases[l]
            z = [float(b[j]) + sum(float(w[j, i]) * a[i] for i in range(len(a))) for j in range(w.shape[0])]
            a = z if l == n_layers - 1 else [math.tanh(v) for v in z]
        out.append(a)
    return out


def mean_soft_ce(model: neural.MlpModel, x, targets) -> float:
    total = 0.0
    for logits, y in zip(naive_forward(model, np.asarray(x)), np.asarray(targets)):
        mx = max(logits)
        log_z = mx + math.log(sum(math.exp(v - mx) for v in logits))
        total += -sum(float(yc) * (lc - log_z) for yc, lc in zip(y, logits))
    return total / len(x)


def finite_difference_grad(model: neural.MlpModel, x, targets, h: float = 1e-5) -> np.ndarray:
    base = neural.params_to_vec(model).values
    grad = np.empty_like(base)
    for i in range(base.size):
        up, down = base.copy(), base.copy()
        up[i] += h
        down[i] -= h
        f_up = mean_soft_ce(neural.vec_to_params(up, model.layer_sizes), x, targets)
        f_down = mean_soft_ce(neural.vec_to_params(down, model.layer_sizes), x, targets)
        grad[i] = (f_up - f_down) / (2 * h)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if denom == 0 else float(np.linalg.norm(a - b) / denom)


def random_mlp_case(rng: np.random.Generator, max_width: int = 8, max_batch: int = 4):
    depth = int(rng.integers(1, 3))  # hidden layers
    sizes = [int(rng.integers(1, max_width + 1))]
    sizes += [int(rng.integers(1, max_width + 1)) for _ in range(depth)]
    sizes.append(int(rng.integers(2, max_width + 1)))
    model = neural.init_model(sizes, int(rng.integers(2**31)))
    n = int(rng.integers(1, max_batch + 1))
    x = rng.normal(size=(n, sizes[0]))
    targets = rng.dirichlet(np.ones(sizes[-1]), size=n)
    return model, x, targets


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance reporting ------------------------------------------------------

_ACCEPTANCE: list[tuple[str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None and (rep.when == "call" or (rep.when == "setup" and rep.failed)):
        status = "PASS" if rep.passed else "FAIL"
        _ACCEPTANCE.append((marker.args[0], f"{status}  criterion {marker.args[0]}: {marker.args[1]}"))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE, key=lambda t: int(t[0])):
        terminalreporter.write_line(line)
