"""Small dense MLP classifier with analytic gradients.

Matrices are plain ``numpy`` float64 arrays of shape ``(rows, cols)``.
Hidden layers use ``tanh``; the output layer is linear and produces logits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import losses
from .errors import ConfigError, ShapeError


@dataclass(frozen=True)
class MlpModel:
    layer_sizes: tuple[int, ...]
    weights: tuple[np.ndarray, ...]  # weights[l] has shape (layer_sizes[l+1], layer_sizes[l])
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        sizes = self.layer_sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ShapeError("need one weight matrix and bias per layer transition")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[l + 1], sizes[l]) or b.shape != (sizes[l + 1],):
                raise ShapeError(
                    f"layer {l}: weight {w.shape}, bias {b.shape} do not match sizes {sizes}"
                )

    @property
    def n_classes(self) -> int:
        return self.layer_sizes[-1]


@dataclass(frozen=True)
class ParamVector:
    """Flat parameter vector together with the layer sizes it came from."""

    values: np.ndarray
    layer_sizes: tuple[int, ...]

    def __post_init__(self):
        expected = param_count(self.layer_sizes)
        if self.values.ndim != 1 or self.values.shape[0] != expected:
            raise ShapeError(
                f"parameter vector has length {self.values.size}, "
                f"layer sizes {self.layer_sizes} imply {expected}"
            )

    def __len__(self) -> int:
        return self.values.shape[0]


def _check_sizes(layer_sizes: Sequence[int]) -> tuple[int, ...]:
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2:
        raise ConfigError(f"layer_sizes needs at least 2 entries, got {list(sizes)}")
    if any(s < 1 for s in sizes):
        raise ConfigError(f"layer_sizes entries must be >= 1, got {list(sizes)}")
    return sizes


def param_count(layer_sizes: Sequence[int]) -> int:
    sizes = _check_sizes(layer_sizes)
    return sum(sizes[l] * sizes[l + 1] + sizes[l + 1] for l in range(len(sizes) - 1))


def init_model(layer_sizes: Sequence[int], seed: int) -> MlpModel:
    """Glorot-uniform weights, zero biases."""
    sizes = _check_sizes(layer_sizes)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        a = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-a, a, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(sizes, tuple(weights), tuple(biases))


def _as_batch(model: MlpModel, batch) -> np.ndarray:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.layer_sizes[0]:
        raise ShapeError(
            f"batch shape {x.shape} incompatible with input width {model.layer_sizes[0]}"
        )
    return x


def forward_trace(model: MlpModel, batch) -> list[np.ndarray]:
    """Return every layer's activation, input first and logits last."""
    x = _as_batch(model, batch)
    acts = [x]
    last = len(model.weights) - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = acts[-1] @ w.T + b
        acts.append(z if l == last else np.tanh(z))
    if not np.isfinite(acts[-1]).all():
        raise FloatingPointError("non-finite logits")
    return acts


def forward(model: MlpModel, batch) -> np.ndarray:
    return forward_trace(model, batch)[-1]


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _backward(model: MlpModel, acts: list[np.ndarray], dlogits: np.ndarray) -> ParamVector:
    n_layers = len(model.weights)
    grad_w: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    grad_b: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    delta = dlogits
    for l in range(n_layers - 1, -1, -1):
        grad_w[l] = delta.T @ acts[l]
        grad_b[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ model.weights[l]) * (1.0 - acts[l] ** 2)
    return _flatten(model.layer_sizes, grad_w, grad_b)


def loss_grads_probs(model: MlpModel, batch, targets) -> tuple[float, ParamVector, np.ndarray]:
    """Like :func:`loss_and_grads` but also hands back the softmax outputs."""
    acts = forward_trace(model, batch)
    y = np.asarray(targets, dtype=np.float64)
    n, m = acts[-1].shape
    if y.shape != (n, m):
        raise ShapeError(f"targets shape {y.shape}, expected {(n, m)}")
    p = softmax(acts[-1])
    loss = float(losses.cross_entropy_rows(p, y).mean())
    grads = _backward(model, acts, (p - y) / n)
    return loss, grads, p


def loss_and_grads(model: MlpModel, batch, targets) -> tuple[float, ParamVector]:
    """Batch-mean soft-target cross-entropy and its exact gradient.

    ``targets`` is an ``(n, M)`` array (or a list of length-M distributions).
    """
    loss, grads, _ = loss_grads_probs(model, batch, targets)
    return loss, grads


def _flatten(layer_sizes, weights, biases) -> ParamVector:
    parts = []
    for w, b in zip(weights, biases):
        parts.append(w.reshape(-1))
        parts.append(b)
    return ParamVector(np.concatenate(parts), tuple(layer_sizes))


def params_to_vec(model: MlpModel) -> ParamVector:
    return _flatten(model.layer_sizes, model.weights, model.biases)


def vec_to_params(vec: ParamVector | np.ndarray, layer_sizes: Sequence[int] | None = None) -> MlpModel:
    if isinstance(vec, ParamVector):
        values = vec.values
        sizes = _check_sizes(layer_sizes if layer_sizes is not None else vec.layer_sizes)
        if layer_sizes is not None and sizes != vec.layer_sizes:
            raise ShapeError(f"vector was flattened from {vec.layer_sizes}, not {sizes}")
    else:
        if layer_sizes is None:
            raise ShapeError("layer_sizes required for a bare array")
        values = np.asarray(vec, dtype=np.float64)
        sizes = _check_sizes(layer_sizes)
    expected = param_count(sizes)
    if values.ndim != 1 or values.shape[0] != expected:
        raise ShapeError(f"vector length {values.size} != {expected} for sizes {list(sizes)}")
    weights, biases = [], []
    off = 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(values[off : off + fan_in * fan_out].reshape(fan_out, fan_in).copy())
        off += fan_in * fan_out
        biases.append(values[off : off + fan_out].copy())
        off += fan_out
    return MlpModel(sizes, tuple(weights), tuple(biases))


def predict(model: MlpModel, batch) -> np.ndarray:
    """Argmax class per row; ties go to the lowest index."""
    return np.argmax(forward(model, batch), axis=1)
