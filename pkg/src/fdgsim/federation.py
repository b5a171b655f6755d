"""Federated training with label smoothing and per-client training budgets.

One communication round:

1. the server broadcasts the global vector to every client;
2. each client trains one pass of mini-batch updates over its working set,
   which is its own data or, with the budget on, an exact-size resample of
   it, so every client takes ``budget // batch`` steps;
3. the server averages the returned vectors (uniform mean by default).

Only parameter vectors cross the client/server boundary; every crossing
goes through a :class:`Channel` so tests can count them.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import domains, losses, neural, optim
from .domains import DomainDataset
from .errors import ClientError, ConfigError, FdgError, ShapeError
from .neural import ParamVector
from .seeding import STREAM_BATCHES, STREAM_INIT, STREAM_RESAMPLE, derive_seed

log = logging.getLogger(__name__)

AGGREGATIONS = ("uniform", "weighted")


class IsolationError(FdgError):
    """Held-out target data reached a training code path."""


@dataclass(frozen=True)
class FedConfig:
    rounds: int = 100
    epsilon: float = 0.1
    smoothing_enabled: bool = True
    budget_S: int = 30 * 64
    budget_enabled: bool = True
    batch_B: int = 64
    optimizer: optim.OptimizerConfig = field(default_factory=optim.OptimizerConfig)
    aggregation: str = "uniform"
    layer_sizes: tuple[int, ...] = (2, 32, 4)
    master_seed: int = 0
    K: int | None = None  # None: one client per non-held-out domain

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        if self.rounds < 1:
            raise ConfigError(f"rounds must be >= 1, got {self.rounds}")
        if self.batch_B < 1:
            raise ConfigError(f"batch_B must be >= 1, got {self.batch_B}")
        if self.budget_enabled and self.budget_S < self.batch_B:
            raise ConfigError(f"budget_S ({self.budget_S}) must be >= batch_B ({self.batch_B})")
        if self.aggregation not in AGGREGATIONS:
            raise ConfigError(f"aggregation must be one of {AGGREGATIONS}, got {self.aggregation!r}")
        if self.K is not None and self.K < 1:
            raise ConfigError(f"K must be >= 1, got {self.K}")
        if self.master_seed < 0:
            raise ConfigError(f"master_seed must be >= 0, got {self.master_seed}")
        losses.check_epsilon(self.epsilon)
        neural.param_count(self.layer_sizes)

    @property
    def effective_epsilon(self) -> float:
        return self.epsilon if self.smoothing_enabled else 0.0

    @property
    def n_classes(self) -> int:
        return self.layer_sizes[-1]


@dataclass(frozen=True)
class ClientState:
    client_id: int
    dataset: DomainDataset

    def __post_init__(self):
        if self.dataset.held_out:
            raise IsolationError(
                f"client {self.client_id} was handed held-out domain {self.dataset.domain_id}"
            )


@dataclass(frozen=True)
class GlobalModel:
    params: ParamVector
    round_index: int = 0  # rounds aggregated so far


@dataclass(frozen=True)
class ClientStats:
    client_id: int
    steps_taken: int
    mean_local_loss: float
    nll_part: float
    smooth_part: float
    working_size: int
    warning: str | None = None


@dataclass(frozen=True)
class RoundReport:
    round_index: int
    clients: tuple[ClientStats, ...]
    global_acc: float
    uploads: int
    downloads: int


@dataclass(frozen=True)
class DomainOutcome:
    held_out: str
    final_acc: float
    best_acc: float
    best_round: int
    train_acc: float  # final global model on the union of client data
    rounds: tuple[RoundReport, ...]


@dataclass(frozen=True)
class ExperimentResult:
    config: FedConfig
    outcomes: tuple[DomainOutcome, ...]

    @property
    def accuracies(self) -> dict[str, float]:
        return {o.held_out: o.final_acc for o in self.outcomes}

    @property
    def mean_final(self) -> float:
        return float(np.mean([o.final_acc for o in self.outcomes]))

    @property
    def mean_best(self) -> float:
        return float(np.mean([o.best_acc for o in self.outcomes]))


class Channel:
    """The only path parameters take between server and clients."""

    def __init__(self):
        self.downloads = 0
        self.uploads = 0

    def download(self, client_id: int, params: ParamVector) -> ParamVector:
        self.downloads += 1
        return replace(params, values=params.values.copy())

    def upload(self, client_id: int, params: ParamVector) -> ParamVector:
        self.uploads += 1
        return replace(params, values=params.values.copy())


def working_set(client: ClientState, cfg: FedConfig, round_index: int) -> DomainDataset:
    if not cfg.budget_enabled:
        return client.dataset
    seed = derive_seed(cfg.master_seed, STREAM_RESAMPLE, client.client_id, round_index)
    return domains.budget_resample(client.dataset, cfg.budget_S, seed)


def local_train(
    global_params: ParamVector, client: ClientState, cfg: FedConfig, round_index: int
) -> tuple[ParamVector, ClientStats]:
    """One local pass starting from the global parameters."""
    if client.dataset.held_out:
        raise IsolationError(f"held-out domain {client.dataset.domain_id} passed to local_train")
    if tuple(global_params.layer_sizes) != cfg.layer_sizes:
        raise ShapeError(f"global params shaped {global_params.layer_sizes}, config says {cfg.layer_sizes}")
    data = working_set(client, cfg, round_index)
    order = domains.batch_indices(
        len(data), cfg.batch_B,
        derive_seed(cfg.master_seed, STREAM_BATCHES, client.client_id, round_index),
    )
    targets = losses.smooth_label_matrix(data.labels, cfg.n_classes, cfg.effective_epsilon)

    params = global_params
    state = optim.init_state(len(params))
    batch_loss, batch_nll, batch_smooth = [], [], []
    for idx in order:
        model = neural.vec_to_params(params)
        loss, grads, p = neural.loss_grads_probs(model, data.features[idx], targets[idx])
        nll, smooth = losses.decompose_rows(p, data.labels[idx])
        batch_loss.append(loss)
        batch_nll.append(nll.mean())
        batch_smooth.append(smooth.mean())
        params, state = optim.step(state, params, grads, cfg.optimizer)

    warning = None
    if not order:
        warning = f"working set of {len(data)} samples is smaller than batch size {cfg.batch_B}; no steps taken"
        warnings.warn(f"client {client.client_id}: {warning}", RuntimeWarning, stacklevel=2)
    stats = ClientStats(
        client.client_id,
        len(order),
        float(np.mean(batch_loss)) if order else math.nan,
        float(np.mean(batch_nll)) if order else math.nan,
        float(np.mean(batch_smooth)) if order else math.nan,
        len(data),
        warning,
    )
    return params, stats


def _values(p) -> np.ndarray:
    return p.values if isinstance(p, ParamVector) else np.asarray(p, dtype=np.float64)


def _average(params_list, numerators: Sequence[float], denominator: float):
    """Sum of ``numerators[i] * row_i`` over ``denominator``; same kind of object as the inputs."""
    if len(params_list) == 0:
        raise ShapeError("nothing to aggregate")
    rows = [_values(p) for p in params_list]
    shapes = {r.shape for r in rows}
    if len(shapes) != 1 or rows[0].ndim != 1:
        raise ShapeError(f"parameter vectors of differing lengths: {sorted(shapes)}")
    acc = np.zeros_like(rows[0])
    agree = np.ones(rows[0].shape, dtype=bool)
    for w, row in zip(numerators, rows):
        acc += w * row
        agree &= row == rows[0]
    # where every client holds the same value the mean is that value, exactly
    out = np.where(agree, rows[0], acc / denominator)
    first = params_list[0]
    return replace(first, values=out) if isinstance(first, ParamVector) else out


def aggregate_uniform(params_list: Sequence[ParamVector]) -> ParamVector:
    """Coordinatewise mean with weight 1/K per client."""
    k = len(params_list)
    if k == 0:
        raise ShapeError("nothing to aggregate")
    return _average(params_list, [1.0] * k, float(k))


def aggregate_weighted(params_list: Sequence[ParamVector], sizes: Sequence[int]) -> ParamVector:
    """FedAvg-style mean weighted by client sample counts."""
    if len(sizes) != len(params_list):
        raise ShapeError(f"{len(sizes)} sizes for {len(params_list)} vectors")
    if any(s <= 0 for s in sizes):
        raise ConfigError(f"sizes must be positive, got {list(sizes)}")
    if len(set(sizes)) == 1:
        # equal weights: same arithmetic as the uniform mean
        return aggregate_uniform(params_list)
    return _average(params_list, [float(s) for s in sizes], float(sum(sizes)))


def evaluate(params: ParamVector, dataset: DomainDataset, cfg: FedConfig | None = None) -> float:
    """Fraction of samples whose argmax logit equals the label."""
    model = neural.vec_to_params(params, cfg.layer_sizes if cfg is not None else None)
    return float(np.mean(neural.predict(model, dataset.features) == dataset.labels))


def run_round(
    global_model: GlobalModel,
    clients: Sequence[ClientState],
    cfg: FedConfig,
    eval_set: DomainDataset,
    channel: Channel | None = None,
    max_workers: int = 1,
) -> tuple[GlobalModel, RoundReport]:
    channel = channel if channel is not None else Channel()
    down0, up0 = channel.downloads, channel.uploads
    ordered = sorted(clients, key=lambda c: c.client_id)
    if len({c.client_id for c in ordered}) != len(ordered):
        raise ConfigError("client ids must be unique")
    t = global_model.round_index

    def work(client: ClientState):
        local = channel.download(client.client_id, global_model.params)
        try:
            theta, stats = local_train(local, client, cfg, t)
        except IsolationError:
            raise
        except Exception as exc:
            raise ClientError(client.client_id, exc) from exc
        return channel.upload(client.client_id, theta), stats

    if max_workers > 1 and len(ordered) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(work, ordered))
    else:
        results = [work(c) for c in ordered]

    uploaded = [r[0] for r in results]
    stats = tuple(r[1] for r in results)
    if cfg.aggregation == "uniform":
        new_params = aggregate_uniform(uploaded)
    else:
        new_params = aggregate_weighted(uploaded, [s.working_size for s in stats])
    new_model = GlobalModel(new_params, t + 1)
    report = RoundReport(
        t + 1,
        stats,
        evaluate(new_params, eval_set, cfg),
        channel.uploads - up0,
        channel.downloads - down0,
    )
    return new_model, report


def clients_for(task: Sequence[DomainDataset], held_out: int) -> list[ClientState]:
    """One client per domain other than ``held_out``; client id is the domain index."""
    return [ClientState(i, d) for i, d in enumerate(task) if i != held_out]


def initial_model(cfg: FedConfig, held_out: int) -> GlobalModel:
    model = neural.init_model(cfg.layer_sizes, derive_seed(cfg.master_seed, STREAM_INIT, held_out))
    return GlobalModel(neural.params_to_vec(model), 0)


def run_held_out(
    task: Sequence[DomainDataset],
    held_out: int,
    cfg: FedConfig,
    max_workers: int = 1,
    on_round: Callable[[RoundReport], None] | None = None,
) -> DomainOutcome:
    target = replace(task[held_out], held_out=True)
    clients = clients_for(task, held_out)
    _check_task(task, cfg, len(clients))
    model = initial_model(cfg, held_out)
    reports = []
    for _ in range(cfg.rounds):
        model, report = run_round(model, clients, cfg, target, max_workers=max_workers)
        reports.append(report)
        if on_round is not None:
            on_round(report)
    accs = [r.global_acc for r in reports]
    best = int(np.argmax(accs))
    train_acc = evaluate(model.params, domains.concat([c.dataset for c in clients]), cfg)
    return DomainOutcome(
        target.domain_id, accs[-1], accs[best], reports[best].round_index, train_acc, tuple(reports)
    )


def _check_task(task: Sequence[DomainDataset], cfg: FedConfig, n_clients: int):
    if cfg.K is not None and cfg.K != n_clients:
        raise ConfigError(f"K={cfg.K} but leave-one-out over {len(task)} domains gives {n_clients} clients")
    for d in task:
        if d.feature_dim != cfg.layer_sizes[0] or d.n_classes != cfg.n_classes:
            raise ConfigError(
                f"domain {d.domain_id} has d_in={d.feature_dim}, M={d.n_classes}; "
                f"model expects {cfg.layer_sizes[0]} inputs and {cfg.n_classes} classes"
            )


def run_experiment(
    task: Sequence[DomainDataset], cfg: FedConfig, max_workers: int = 1
) -> ExperimentResult:
    """Leave-one-domain-out: each domain in turn is the unseen target."""
    if len(task) < 2:
        raise ConfigError(f"leave-one-domain-out needs >= 2 domains, got {len(task)}")
    outcomes = []
    for h in range(len(task)):
        out = run_held_out(task, h, cfg, max_workers=max_workers)
        log.info("held out %s: final %.4f best %.4f", out.held_out, out.final_acc, out.best_acc)
        outcomes.append(out)
    return ExperimentResult(cfg, tuple(outcomes))
