"""Fast invariant checks runnable from the command line (``fdgsim selftest``)."""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import domains, losses, neural, optim
from .federation import ClientState, FedConfig, aggregate_uniform, aggregate_weighted, local_train
from .neural import ParamVector


def _fd_grad(model: neural.MlpModel, x, y, h: float = 1e-5) -> np.ndarray:
    base = neural.params_to_vec(model).values
    out = np.empty_like(base)
    for i in range(base.size):
        vals = []
        for sign in (1.0, -1.0):
            v = base.copy()
            v[i] += sign * h
            m = neural.vec_to_params(v, model.layer_sizes)
            p = neural.softmax(neural.forward(m, x))
            vals.append(losses.cross_entropy_rows(p, y).mean())
        out[i] = (vals[0] - vals[1]) / (2 * h)
    return out


def check_label_sums() -> str | None:
    for m in (2, 3, 7, 64):
        for eps in np.round(np.arange(0, 101) * 0.01, 2):
            for y in (0, m - 1):
                s = losses.smooth_labels(y, m, eps).sum()
                if abs(s - 1.0) > 1e-12:
                    return f"M={m} eps={eps} y={y}: sum {s!r}"
    return None


def check_decomposition() -> str | None:
    rng = np.random.default_rng(1)
    for _ in range(200):
        m = int(rng.integers(2, 10))
        p = rng.dirichlet(np.ones(m))
        y, eps = int(rng.integers(m)), float(rng.uniform())
        a = losses.smoothed_cross_entropy(p, losses.smooth_labels(y, m, eps))
        b = losses.decompose_loss(p, y, eps).total
        if abs(a - b) > 1e-9 * max(abs(a), 1e-300):
            return f"{a!r} vs {b!r}"
    return None


def check_gradients() -> str | None:
    rng = np.random.default_rng(2)
    for _ in range(20):
        sizes = [int(s) for s in rng.integers(1, 7, size=int(rng.integers(2, 4)))]
        sizes[-1] = max(sizes[-1], 2)
        model = neural.init_model(sizes, int(rng.integers(1 << 30)))
        n = int(rng.integers(1, 5))
        x = rng.normal(size=(n, sizes[0]))
        y = rng.dirichlet(np.ones(sizes[-1]), size=n)
        _, g = neural.loss_and_grads(model, x, y)
        fd = _fd_grad(model, x, y)
        err = np.linalg.norm(g.values - fd) / max(np.linalg.norm(g.values), np.linalg.norm(fd), 1e-12)
        if err >= 1e-4:
            return f"sizes {sizes}: relative error {err:.3g}"
    return None


def check_budget_balance() -> str | None:
    spec = domains.SyntheticTaskSpec(domain_sizes=(256, 512, 1024, 4096))
    task = domains.generate_task(spec, 0)
    for budget_on, expected in ((True, [30] * 4), (False, [4, 8, 16, 64])):
        cfg = FedConfig(rounds=1, budget_enabled=budget_on, budget_S=1920, batch_B=64,
                        optimizer=optim.OptimizerConfig("sgd", eta=1e-3))
        params = neural.params_to_vec(neural.init_model(cfg.layer_sizes, 0))
        steps = [local_train(params, ClientState(i, d), cfg, 0)[1].steps_taken for i, d in enumerate(task)]
        if steps != expected:
            return f"budget={'on' if budget_on else 'off'}: steps {steps}, expected {expected}"
    return None


def check_aggregation() -> str | None:
    rng = np.random.default_rng(3)
    for _ in range(20):
        k = int(rng.integers(1, 6))
        sizes_layer = (int(rng.integers(1, 5)), int(rng.integers(1, 5)))
        n = neural.param_count(sizes_layer)
        vecs = rng.normal(size=(k, n))
        weights = rng.integers(1, 100, size=k)
        pvs = [ParamVector(v.copy(), sizes_layer) for v in vecs]
        brute = np.array([sum(v[j] for v in vecs) / k for j in range(n)])
        if np.max(np.abs(aggregate_uniform(pvs).values - brute)) > 1e-15 * max(1.0, np.abs(vecs).max()):
            return "uniform mean mismatch"
        wbrute = np.array([sum(w * v[j] for w, v in zip(weights, vecs)) / weights.sum() for j in range(n)])
        if np.max(np.abs(aggregate_weighted(pvs, weights).values - wbrute)) > 1e-15 * max(1.0, np.abs(vecs).max()):
            return "weighted mean mismatch"
    return None


def check_resampler() -> str | None:
    rng = np.random.default_rng(4)
    for n in range(1, 30):
        for s in range(1, 30):
            idx = domains.resample_indices(n, s, rng)
            counts = np.bincount(idx, minlength=n)
            if idx.size != s or counts.min() < s // n or counts.max() > -(-s // n):
                return f"|D|={n} S={s}: counts {counts.tolist()}"
    return None


CHECKS: dict[str, Callable[[], str | None]] = {
    "label smoothing sums to one": check_label_sums,
    "smoothed CE equals NLL/smooth decomposition": check_decomposition,
    "analytic gradients match finite differences": check_gradients,
    "budget equalises local step counts": check_budget_balance,
    "aggregation matches brute-force means": check_aggregation,
    "resampler size and multiplicities": check_resampler,
}


def run(echo: Callable[[str], None] = print) -> bool:
    ok = True
    for name, fn in CHECKS.items():
        problem = fn()
        echo(f"{'PASS' if problem is None else 'FAIL'}  {name}" + ("" if problem is None else f": {problem}"))
        ok &= problem is None
    return ok
