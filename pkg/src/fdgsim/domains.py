"""Synthetic rotated-cluster domains, budget resampling and batching."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, ShapeError
from .seeding import STREAM_DOMAIN, derive_seed


@dataclass(frozen=True, eq=False)
class DomainDataset:
    """Immutable labelled samples from one domain.

    ``held_out`` marks the target domain of a leave-one-out run; local
    training refuses datasets carrying it.
    """

    domain_id: str
    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    held_out: bool = False

    def __post_init__(self):
        x = np.array(self.features, dtype=np.float64)
        y = np.array(self.labels, dtype=np.int64)
        if x.ndim != 2 or x.shape[0] == 0:
            raise ShapeError(f"domain {self.domain_id}: need a non-empty 2-D feature array")
        if y.shape != (x.shape[0],):
            raise ShapeError(f"domain {self.domain_id}: {y.shape[0]} labels for {x.shape[0]} samples")
        if not np.isfinite(x).all():
            raise ValueError(f"domain {self.domain_id}: non-finite features")
        if y.min() < 0 or y.max() >= self.n_classes:
            raise ValueError(f"domain {self.domain_id}: labels outside [0, {self.n_classes})")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def take(self, idx) -> "DomainDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return replace(self, features=self.features[idx], labels=self.labels[idx])

    def same_data(self, other: "DomainDataset") -> bool:
        return (
            self.domain_id == other.domain_id
            and self.n_classes == other.n_classes
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )


@dataclass(frozen=True)
class SyntheticTaskSpec:
    class_count: int = 4
    feature_dim: int = 2
    domain_angles: tuple[float, ...] = (0.0, 25.0, 50.0, 75.0)
    domain_sizes: tuple[int, ...] = (256, 512, 1024, 4096)
    noise_sigma: float = 0.35
    cluster_radius: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "domain_angles", tuple(float(a) for a in self.domain_angles))
        object.__setattr__(self, "domain_sizes", tuple(int(s) for s in self.domain_sizes))
        if self.class_count < 2:
            raise ConfigError(f"class_count must be >= 2, got {self.class_count}")
        if self.feature_dim < 2:
            raise ConfigError(f"feature_dim must be >= 2, got {self.feature_dim}")
        if len(self.domain_angles) != len(self.domain_sizes):
            raise ConfigError("domain_angles and domain_sizes must have equal length")
        if len(self.domain_angles) < 2:
            raise ConfigError("need at least 2 domains")
        if any(s < self.class_count for s in self.domain_sizes):
            raise ConfigError(f"every domain size must be >= class_count ({self.class_count})")
        if self.noise_sigma < 0 or not math.isfinite(self.noise_sigma):
            raise ConfigError(f"noise_sigma must be finite and >= 0, got {self.noise_sigma}")
        if not self.cluster_radius > 0:
            raise ConfigError(f"cluster_radius must be > 0, got {self.cluster_radius}")


def rotation(angle_deg: float) -> np.ndarray:
    a = math.radians(angle_deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s], [s, c]])


def class_centers(spec: SyntheticTaskSpec, angle_deg: float = 0.0) -> np.ndarray:
    """Cluster centres of one domain, one row per class."""
    m = spec.class_count
    base = 2.0 * np.pi * np.arange(m) / m
    centers = np.zeros((m, spec.feature_dim))
    centers[:, 0] = spec.cluster_radius * np.cos(base)
    centers[:, 1] = spec.cluster_radius * np.sin(base)
    return _rotate(centers, angle_deg)


def _rotate(x: np.ndarray, angle_deg: float) -> np.ndarray:
    out = x.copy()
    out[:, :2] = x[:, :2] @ rotation(angle_deg).T
    return out


def generate_domain(spec: SyntheticTaskSpec, index: int, seed: int) -> DomainDataset:
    n = spec.domain_sizes[index]
    m = spec.class_count
    rng = np.random.default_rng(derive_seed(seed, STREAM_DOMAIN, index))
    labels = np.arange(n) % m
    base = class_centers(spec, 0.0)[labels]
    x = base + spec.noise_sigma * rng.standard_normal((n, spec.feature_dim))
    return DomainDataset(f"d{index}", _rotate(x, spec.domain_angles[index]), labels, m)


def generate_task(spec: SyntheticTaskSpec, seed: int) -> list[DomainDataset]:
    """One dataset per domain; domains differ only by a rotation of the plane."""
    return [generate_domain(spec, i, seed) for i in range(len(spec.domain_angles))]


def resample_indices(n: int, budget: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of an exact-size-``budget`` resample of ``range(n)``.

    Subsampling draws without replacement. Oversampling repeats every index
    ``budget // n`` times and adds ``budget % n`` distinct extra indices.
    """
    if budget < 1:
        raise ConfigError(f"budget must be >= 1, got {budget}")
    if n < 1:
        raise ValueError("cannot resample an empty dataset")
    if n >= budget:
        idx = rng.choice(n, size=budget, replace=False)
    else:
        reps, extra = divmod(budget, n)
        idx = np.concatenate([np.tile(np.arange(n), reps), rng.choice(n, size=extra, replace=False)])
    return rng.permutation(idx)


def budget_resample(dataset: DomainDataset, budget: int, seed: int) -> DomainDataset:
    return dataset.take(resample_indices(len(dataset), budget, np.random.default_rng(seed)))


class Batch(NamedTuple):
    features: np.ndarray
    labels: np.ndarray


def batch_indices(n: int, batch_size: int, seed: int) -> list[np.ndarray]:
    """Shuffle ``range(n)`` and cut ``n // batch_size`` full batches; the tail is dropped."""
    if batch_size < 1:
        raise ConfigError(f"batch size must be >= 1, got {batch_size}")
    perm = np.random.default_rng(seed).permutation(n)
    return [perm[j * batch_size : (j + 1) * batch_size] for j in range(n // batch_size)]


def batches(dataset: DomainDataset, batch_size: int, seed: int) -> list[Batch]:
    return [
        Batch(dataset.features[i], dataset.labels[i])
        for i in batch_indices(len(dataset), batch_size, seed)
    ]


def concat(datasets: Sequence[DomainDataset], domain_id: str = "union") -> DomainDataset:
    return DomainDataset(
        domain_id,
        np.concatenate([d.features for d in datasets]),
        np.concatenate([d.labels for d in datasets]),
        datasets[0].n_classes,
    )


# -- plain-text export -------------------------------------------------------


def format_dataset(dataset: DomainDataset) -> str:
    lines = [f"# domain={dataset.domain_id} d_in={dataset.feature_dim} M={dataset.n_classes}"]
    for x, y in zip(dataset.features, dataset.labels):
        lines.append(",".join(format(float(v), ".17g") for v in x) + f",{int(y)}")
    return "\n".join(lines) + "\n"


def parse_dataset(text: str) -> DomainDataset:
    rows = text.splitlines()
    if not rows or not rows[0].startswith("#"):
        raise ValueError("missing '# domain=... d_in=... M=...' header")
    header = dict(tok.split("=", 1) for tok in rows[0][1:].split())
    try:
        domain_id, d_in, m = header["domain"], int(header["d_in"]), int(header["M"])
    except KeyError as exc:
        raise ValueError(f"header lacks {exc.args[0]!r}") from None
    feats, labels = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row.strip():
            continue
        parts = row.split(",")
        if len(parts) != d_in + 1:
            raise ValueError(f"line {lineno}: expected {d_in + 1} fields, got {len(parts)}")
        feats.append([float(v) for v in parts[:-1]])
        labels.append(int(parts[-1]))
    return DomainDataset(domain_id, np.array(feats).reshape(-1, d_in), np.array(labels), m)


def save_dataset(dataset: DomainDataset, path: str | os.PathLike) -> Path:
    path = Path(path)
    path.write_text(format_dataset(dataset))
    return path


def load_dataset(path: str | os.PathLike) -> DomainDataset:
    return parse_dataset(Path(path).read_text())
