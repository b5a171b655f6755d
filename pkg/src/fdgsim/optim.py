"""Plain gradient descent and Adam, as pure functions over flat vectors."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, ShapeError
from .neural import ParamVector

KINDS = ("sgd", "adam")


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "adam"
    eta: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"optimizer must be one of {KINDS}, got {self.kind!r}")
        if not self.eta > 0:
            raise ConfigError(f"eta must be > 0, got {self.eta}")
        for name in ("beta1", "beta2"):
            b = getattr(self, name)
            if not 0.0 <= b < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1), got {b}")
        if not self.eps > 0:
            raise ConfigError(f"eps must be > 0, got {self.eps}")


@dataclass(frozen=True)
class OptimizerState:
    t: int
    m: np.ndarray
    v: np.ndarray


def init_state(n_params: int) -> OptimizerState:
    return OptimizerState(0, np.zeros(n_params), np.zeros(n_params))


def step(
    state: OptimizerState, params: ParamVector, grads: ParamVector, cfg: OptimizerConfig
) -> tuple[ParamVector, OptimizerState]:
    p, g = params.values, grads.values
    if p.shape != g.shape or state.m.shape != p.shape:
        raise ShapeError(
            f"params {p.shape}, grads {g.shape}, state {state.m.shape} must agree"
        )
    t = state.t + 1
    if cfg.kind == "sgd":
        return replace(params, values=p - cfg.eta * g), replace(state, t=t)

    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * g
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * (g * g)
    m_hat = m / (1.0 - cfg.beta1**t)
    v_hat = v / (1.0 - cfg.beta2**t)
    new = p - cfg.eta * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return replace(params, values=new), OptimizerState(t, m, v)
