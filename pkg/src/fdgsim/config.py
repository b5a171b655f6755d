"""Run configuration files.

The format is flat ``key = value`` text. Blank lines and ``#`` comments are
ignored; lists are comma-separated. Budgets may be written as a multiple of
the batch size (``30B``), which is resolved against ``batch_B``.

Keys
----
master_seed          int, required
rounds               int (100)
epsilon              float in [0, 1] (0.1)
smoothing_enabled    bool (true)
budget_S             int, ``<n>B`` or ``off`` (30B)
budget_enabled       bool (true; ``budget_S = off`` sets it false)
batch_B              int (64)
optimizer            sgd | adam (adam)
eta                  float (1e-4)
beta1, beta2         float (0.9, 0.999)
adam_eps             float (1e-8)
aggregation          uniform | weighted (uniform)
layer_sizes          ints, first = feature_dim, last = class_count
                     (feature_dim,32,class_count)
K                    int; must equal number of domains - 1 if given
class_count          int (4)
feature_dim          int (2)
domain_angles        floats, degrees (0,25,50,75)
domain_sizes         ints (256,512,1024,4096)
noise_sigma          float (0.35)
cluster_radius       float (1.0)
output_dir           path (runs)
epsilon_grid         floats (0.1,0.2,0.3)
budget_grid          budgets (30B,45B,60B)
ablation_grid        cells from none, budget, smoothing, smoothing+budget
                     (all four)
repeat               int, seeds per grid cell (1)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

from .domains import SyntheticTaskSpec
from .errors import ConfigError, FdgError, ParseError
from .federation import FedConfig
from .optim import OptimizerConfig

ABLATION_CELLS = {
    # cell id -> (smoothing_enabled, budget_enabled)
    "none": (False, False),
    "budget": (False, True),
    "smoothing": (True, False),
    "smoothing+budget": (True, True),
}

REQUIRED = ("master_seed",)
DEFAULT_HIDDEN = 32


@dataclass(frozen=True)
class Budget:
    """A budget as written in the config: absolute or a multiple of the batch size."""

    text: str
    samples: int


@dataclass(frozen=True)
class RunConfig:
    fed: FedConfig
    task: SyntheticTaskSpec
    output_dir: Path = Path("runs")
    epsilon_grid: tuple[float, ...] = (0.1, 0.2, 0.3)
    budget_grid: tuple[Budget, ...] = ()
    ablation_grid: tuple[str, ...] = tuple(ABLATION_CELLS)
    repeat: int = 1

    @property
    def seeds(self) -> list[int]:
        return [self.fed.master_seed + i for i in range(self.repeat)]

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, fed=replace(self.fed, master_seed=seed))

    def quick(self) -> "RunConfig":
        """Rounds and domain sizes scaled down 10x."""
        task = replace(
            self.task,
            domain_sizes=tuple(max(self.task.class_count, s // 10) for s in self.task.domain_sizes),
        )
        return replace(self, task=task, fed=replace(self.fed, rounds=max(1, math.ceil(self.fed.rounds / 10))))


# -- value parsers ------------------------------------------------------------


def _int(text: str) -> int:
    return int(text)


def _float(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError(f"not finite: {text}")
    return v


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _list(item: Callable[[str], object]) -> Callable[[str], tuple]:
    def parse(text: str) -> tuple:
        parts = [p.strip() for p in text.split(",")]
        if not parts or any(p == "" for p in parts):
            raise ValueError("empty list or list item")
        return tuple(item(p) for p in parts)

    return parse


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text

    return parse


def resolve_budget(text: str, batch: int) -> Budget:
    text = text.strip()
    if text.endswith("B"):
        mult = int(text[:-1])
        samples = mult * batch
    else:
        samples = int(text)
    if samples < 1:
        raise ValueError(f"budget must be positive, got {text!r}")
    return Budget(text, samples)


KEYS: dict[str, Callable[[str], object]] = {
    "master_seed": _int,
    "rounds": _int,
    "epsilon": _float,
    "smoothing_enabled": _bool,
    "budget_S": str,
    "budget_enabled": _bool,
    "batch_B": _int,
    "optimizer": _choice("sgd", "adam"),
    "eta": _float,
    "beta1": _float,
    "beta2": _float,
    "adam_eps": _float,
    "aggregation": _choice("uniform", "weighted"),
    "layer_sizes": _list(_int),
    "K": _int,
    "class_count": _int,
    "feature_dim": _int,
    "domain_angles": _list(_float),
    "domain_sizes": _list(_int),
    "noise_sigma": _float,
    "cluster_radius": _float,
    "output_dir": str,
    "epsilon_grid": _list(_float),
    "budget_grid": _list(str),
    "ablation_grid": _list(_choice(*ABLATION_CELLS)),
    "repeat": _int,
}


def _read_pairs(text: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"line {lineno}", f"expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ParseError(key, "unknown key")
        if key in pairs:
            raise ParseError(key, "given more than once")
        pairs[key] = value
    return pairs


def parse_config(data: bytes | str) -> RunConfig:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    raw = _read_pairs(text)
    for key in REQUIRED:
        if key not in raw:
            raise ParseError(key, "required key missing")

    v: dict[str, object] = {}
    for key, text_value in raw.items():
        try:
            v[key] = KEYS[key](text_value)
        except ValueError as exc:
            raise ParseError(key, str(exc)) from None

    def build(key: str, fn: Callable[[], object]):
        # attribute invariant failures to the key that triggered them
        try:
            return fn()
        except FdgError as exc:
            raise ParseError(key, str(exc)) from None

    _check_scalar_ranges(v)
    defaults = SyntheticTaskSpec()
    task = build("domain_sizes", lambda: SyntheticTaskSpec(
        class_count=v.get("class_count", defaults.class_count),
        feature_dim=v.get("feature_dim", defaults.feature_dim),
        domain_angles=v.get("domain_angles", defaults.domain_angles),
        domain_sizes=v.get("domain_sizes", defaults.domain_sizes),
        noise_sigma=v.get("noise_sigma", defaults.noise_sigma),
        cluster_radius=v.get("cluster_radius", defaults.cluster_radius),
    ))

    batch = v.get("batch_B", 64)
    if batch < 1:
        raise ParseError("batch_B", f"must be >= 1, got {batch}")
    budget_enabled = v.get("budget_enabled", True)
    budget_text = str(v.get("budget_S", "30B"))
    if budget_text.lower() == "off":
        if raw.get("budget_enabled") and v["budget_enabled"]:
            raise ParseError("budget_S", "is off but budget_enabled is true")
        budget_enabled, budget_text = False, "30B"
    try:
        budget = resolve_budget(budget_text, batch)
    except ValueError as exc:
        raise ParseError("budget_S", str(exc)) from None

    layer_sizes = v.get("layer_sizes", (task.feature_dim, DEFAULT_HIDDEN, task.class_count))
    if layer_sizes[0] != task.feature_dim or layer_sizes[-1] != task.class_count:
        raise ParseError(
            "layer_sizes",
            f"must start with feature_dim={task.feature_dim} and end with class_count={task.class_count}",
        )
    if "K" in v and v["K"] != len(task.domain_angles) - 1:
        raise ParseError("K", f"leave-one-out over {len(task.domain_angles)} domains gives "
                              f"{len(task.domain_angles) - 1} clients, not {v['K']}")

    opt = build("optimizer", lambda: OptimizerConfig(
        kind=v.get("optimizer", "adam"),
        eta=v.get("eta", 1e-4),
        beta1=v.get("beta1", 0.9),
        beta2=v.get("beta2", 0.999),
        eps=v.get("adam_eps", 1e-8),
    ))
    fed_kwargs = dict(
        rounds=v.get("rounds", 100),
        epsilon=v.get("epsilon", 0.1),
        smoothing_enabled=v.get("smoothing_enabled", True),
        budget_S=budget.samples,
        budget_enabled=budget_enabled,
        batch_B=batch,
        optimizer=opt,
        aggregation=v.get("aggregation", "uniform"),
        layer_sizes=layer_sizes,
        master_seed=v["master_seed"],
        K=v.get("K"),
    )
    fed = build("budget_S", lambda: FedConfig(**fed_kwargs))

    budget_grid = []
    for item in v.get("budget_grid", ("30B", "45B", "60B")):
        try:
            b = resolve_budget(item, batch)
        except ValueError as exc:
            raise ParseError("budget_grid", str(exc)) from None
        if b.samples < batch:
            raise ParseError("budget_grid", f"{item} is smaller than batch_B={batch}")
        budget_grid.append(b)

    eps_grid = v.get("epsilon_grid", (0.1, 0.2, 0.3))
    if any(not 0.0 <= e <= 1.0 for e in eps_grid):
        raise ParseError("epsilon_grid", "values must lie in [0, 1]")
    repeat = v.get("repeat", 1)
    if repeat < 1:
        raise ParseError("repeat", f"must be >= 1, got {repeat}")
    ablation = v.get("ablation_grid", tuple(ABLATION_CELLS))
    if len(set(ablation)) != len(ablation):
        raise ParseError("ablation_grid", "duplicate cell")

    return RunConfig(
        fed=fed,
        task=task,
        output_dir=Path(v.get("output_dir", "runs")),
        epsilon_grid=tuple(eps_grid),
        budget_grid=tuple(budget_grid),
        ablation_grid=tuple(ablation),
        repeat=repeat,
    )


def _check_scalar_ranges(v: dict[str, object]):
    checks = {
        "rounds": lambda x: x >= 1,
        "epsilon": lambda x: 0.0 <= x <= 1.0,
        "master_seed": lambda x: x >= 0,
        "eta": lambda x: x > 0,
        "beta1": lambda x: 0.0 <= x < 1.0,
        "beta2": lambda x: 0.0 <= x < 1.0,
        "adam_eps": lambda x: x > 0,
        "batch_B": lambda x: x >= 1,
        "class_count": lambda x: x >= 2,
        "feature_dim": lambda x: x >= 2,
        "noise_sigma": lambda x: x >= 0,
        "cluster_radius": lambda x: x > 0,
        "domain_sizes": lambda xs: all(x >= 1 for x in xs),
        "domain_angles": lambda xs: len(xs) >= 2,
        "layer_sizes": lambda xs: len(xs) >= 2 and all(x >= 1 for x in xs),
    }
    for key, ok in checks.items():
        if key in v and not ok(v[key]):
            raise ParseError(key, f"value {v[key]} out of range")


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(data)
