"""Label smoothing and the smoothed cross-entropy.

With smoothing coefficient ``eps`` over ``M`` classes the target for true
class ``y`` puts ``1 - eps + eps/M`` on ``y`` and ``eps/M`` everywhere else.
The cross-entropy against that target splits into

    total = (1 - eps) * nll + eps * smooth

where ``nll = -log p_y`` and ``smooth = -(1/M) * sum_c log p_c``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import DomainError, ShapeError

PROB_FLOOR = 1e-12


class LossParts(NamedTuple):
    nll: float
    smooth: float
    total: float


def check_epsilon(eps: float) -> float:
    eps = float(eps)
    if not 0.0 <= eps <= 1.0:
        raise DomainError(f"smoothing coefficient must lie in [0, 1], got {eps}")
    return eps


def smooth_labels(y: int, n_classes: int, eps: float) -> np.ndarray:
    eps = check_epsilon(eps)
    if n_classes < 2:
        raise DomainError(f"need at least 2 classes, got {n_classes}")
    if not 0 <= y < n_classes:
        raise DomainError(f"label {y} outside [0, {n_classes})")
    out = np.full(n_classes, eps / n_classes)
    out[y] = 1.0 - eps + eps / n_classes
    return out


def smooth_label_matrix(labels, n_classes: int, eps: float) -> np.ndarray:
    """Row ``i`` is ``smooth_labels(labels[i], n_classes, eps)``."""
    eps = check_epsilon(eps)
    labels = np.asarray(labels, dtype=np.int64)
    if n_classes < 2:
        raise DomainError(f"need at least 2 classes, got {n_classes}")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise DomainError(f"labels outside [0, {n_classes})")
    out = np.full((labels.shape[0], n_classes), eps / n_classes)
    out[np.arange(labels.shape[0]), labels] = 1.0 - eps + eps / n_classes
    return out


def _log_p(p) -> np.ndarray:
    return np.log(np.maximum(np.asarray(p, dtype=np.float64), PROB_FLOOR))


def smoothed_cross_entropy(p, y_smooth) -> float:
    p = np.asarray(p, dtype=np.float64)
    y_smooth = np.asarray(y_smooth, dtype=np.float64)
    if p.shape != y_smooth.shape or p.ndim != 1:
        raise ShapeError(f"prediction {p.shape} and target {y_smooth.shape} differ")
    return float(-(y_smooth * _log_p(p)).sum())


def cross_entropy_rows(p: np.ndarray, targets: np.ndarray) -> np.ndarray:
    if p.shape != targets.shape:
        raise ShapeError(f"prediction {p.shape} and target {targets.shape} differ")
    return -(targets * _log_p(p)).sum(axis=-1)


def decompose_loss(p, y: int, eps: float) -> LossParts:
    eps = check_epsilon(eps)
    logp = _log_p(p)
    if logp.ndim != 1:
        raise ShapeError(f"expected a single distribution, got shape {logp.shape}")
    if not 0 <= y < logp.shape[0]:
        raise DomainError(f"label {y} outside [0, {logp.shape[0]})")
    nll = float(-logp[y])
    smooth = float(-logp.mean())
    return LossParts(nll, smooth, (1.0 - eps) * nll + eps * smooth)


def decompose_rows(p: np.ndarray, labels) -> tuple[np.ndarray, np.ndarray]:
    """Per-row ``(nll, smooth)`` for a batch of softmax outputs."""
    logp = _log_p(p)
    labels = np.asarray(labels, dtype=np.int64)
    nll = -logp[np.arange(labels.shape[0]), labels]
    smooth = -logp.mean(axis=-1)
    return nll, smooth
