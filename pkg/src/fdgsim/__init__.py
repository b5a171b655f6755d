"""Desk-scale federated domain-generalization simulator.

Label-smoothed local training, fixed per-client training budgets, uniform
model averaging and leave-one-domain-out evaluation on synthetic rotated
Gaussian-cluster domains.
"""

from .domains import (
    DomainDataset,
    SyntheticTaskSpec,
    batches,
    budget_resample,
    generate_task,
    load_dataset,
    save_dataset,
)
from .errors import ConfigError, DomainError, ParseError, ShapeError
from .federation import (
    ClientState,
    ExperimentResult,
    FedConfig,
    GlobalModel,
    RoundReport,
    aggregate_uniform,
    aggregate_weighted,
    evaluate,
    local_train,
    run_experiment,
    run_round,
)
from .losses import decompose_loss, smooth_labels, smoothed_cross_entropy
from .neural import (
    MlpModel,
    ParamVector,
    forward,
    init_model,
    loss_and_grads,
    params_to_vec,
    softmax,
    vec_to_params,
)
from .optim import OptimizerConfig, OptimizerState, step

__version__ = "0.1.0"
